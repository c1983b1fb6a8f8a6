// DOM wiring: everything rendered comes from render.ts, everything fetched
// from api.ts, and per-database state lives in QuerySession.

import {
  ApiError,
  curateHints,
  getHints,
  listDatabases,
  submitQuery,
  type HistoryUpload,
  type QueryResponse,
} from "./api.js";
import {
  renderAnswerPanel,
  renderCurationInProgress,
  renderDatabaseOption,
  renderErrorBanner,
  renderHintsPanel,
  renderValidationErrors,
} from "./render.js";
import { QuerySession } from "./state.js";

const sessions = new Map<string, QuerySession>();
let lastResponse: QueryResponse | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function currentSession(): QuerySession {
  const dbId = el<HTMLSelectElement>("db-select").value;
  let session = sessions.get(dbId);
  if (!session) {
    session = new QuerySession(dbId);
    sessions.set(dbId, session);
  }
  return session;
}

async function refreshDatabases(): Promise<void> {
  const select = el<HTMLSelectElement>("db-select");
  try {
    const databases = await listDatabases();
    select.innerHTML = databases
      .map((db) => renderDatabaseOption(db.db_id, db.table_count, db.has_hints))
      .join("");
    if (databases.length > 0) {
      await refreshHints();
    }
  } catch (error) {
    el("hints-panel").innerHTML = renderErrorBanner(
      `could not load databases: ${String(error)}`,
      false,
    );
  }
}

async function refreshHints(): Promise<void> {
  const panel = el("hints-panel");
  const session = currentSession();
  try {
    const hints = await getHints(session.dbId);
    panel.innerHTML = renderHintsPanel(hints);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      panel.innerHTML = renderHintsPanel(null);
      document
        .getElementById("curate-btn")
        ?.addEventListener("click", () => void curateNow());
    } else {
      panel.innerHTML = renderErrorBanner(`hints unavailable: ${String(error)}`, false);
    }
  }
}

function readHistoryUpload(): HistoryUpload[] | null {
  const raw = window.prompt(
    'Paste a JSON array of historical queries: [{"sql": "...", "question": "..."}]',
    "[]",
  );
  if (raw === null) return null;
  try {
    const parsed = JSON.parse(raw);
    if (!Array.isArray(parsed) || parsed.length === 0) return null;
    return parsed as HistoryUpload[];
  } catch {
    return null;
  }
}

async function curateNow(): Promise<void> {
  const panel = el("hints-panel");
  const session = currentSession();
  const history = readHistoryUpload();
  if (!history) {
    panel.innerHTML = renderErrorBanner("curation needs a non-empty history array", false);
    return;
  }
  panel.innerHTML = `<div class="hints-progress">curating…</div>`;
  try {
    const hints = await curateHints(session.dbId, history);
    panel.innerHTML = renderHintsPanel(hints);
  } catch (error) {
    if (error instanceof ApiError && error.status === 409) {
      panel.innerHTML = renderCurationInProgress();
    } else {
      panel.innerHTML = renderErrorBanner(`curation failed: ${String(error)}`, false);
    }
  }
}

function renderPage(page: number): void {
  if (!lastResponse) return;
  el("answer-panel").innerHTML = renderAnswerPanel(lastResponse, page);
  wirePager();
}

function wirePager(): void {
  document.querySelectorAll<HTMLButtonElement>(".pager button").forEach((button) => {
    button.addEventListener("click", () => {
      renderPage(Number(button.dataset.page ?? 0));
    });
  });
}

async function ask(): Promise<void> {
  const session = currentSession();
  const questionInput = el<HTMLInputElement>("question");
  const question = questionInput.value.trim();
  if (!question || session.isPending) return;

  const submit = el<HTMLButtonElement>("ask-btn");
  submit.disabled = true;
  const answerPanel = el("answer-panel");
  answerPanel.innerHTML = `<div class="spinner">running…</div>`;
  const useHints = session.begin();
  try {
    const response = await submitQuery(session.dbId, question, useHints);
    session.complete(question, useHints, response);
    lastResponse = response;
    renderPage(0);
  } catch (error) {
    session.fail();
    if (error instanceof ApiError && error.status === 422) {
      answerPanel.innerHTML = renderValidationErrors(error.detail);
    } else {
      answerPanel.innerHTML = renderErrorBanner(String(error));
      document
        .getElementById("retry-btn")
        ?.addEventListener("click", () => void ask());
    }
  } finally {
    submit.disabled = false;
  }
}

export function init(): void {
  el<HTMLButtonElement>("ask-btn").addEventListener("click", () => void ask());
  el<HTMLInputElement>("question").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void ask();
  });
  el<HTMLInputElement>("use-hints").addEventListener("change", (event) => {
    currentSession().useHints = (event.target as HTMLInputElement).checked;
  });
  el<HTMLSelectElement>("db-select").addEventListener("change", () => {
    el<HTMLInputElement>("use-hints").checked = currentSession().useHints;
    void refreshHints();
  });
  void refreshDatabases();
}

if (typeof document !== "undefined" && document.getElementById("ask-btn")) {
  init();
}
