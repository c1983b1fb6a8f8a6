// Pure HTML renderers: every function maps response data to a markup string,
// so the console's output is testable without a DOM.

import type { AttemptInfo, HintEntry, QueryResponse } from "./api.js";

const SQL_KEYWORDS = new Set([
  "select", "from", "where", "inner", "left", "right", "outer", "join", "on",
  "group", "by", "order", "having", "limit", "offset", "as", "and", "or",
  "not", "in", "is", "null", "like", "between", "union", "intersect",
  "except", "all", "distinct", "with", "case", "when", "then", "else", "end",
  "count", "sum", "avg", "min", "max", "asc", "desc", "exists",
]);

export function escapeHtml(value: unknown): string {
  return String(value)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function highlightSql(sql: string): string {
  // tokenize on strings first so quoted text is never keyword-styled
  const parts = sql.split(/('(?:[^']|'')*')/g);
  return parts
    .map((part, i) => {
      if (i % 2 === 1) {
        return `<span class="sql-str">${escapeHtml(part)}</span>`;
      }
      return part.replace(/\b([A-Za-z_]+)\b/g, (word) =>
        SQL_KEYWORDS.has(word.toLowerCase())
          ? `<span class="sql-kw">${escapeHtml(word)}</span>`
          : escapeHtml(word),
      );
    })
    .join("");
}

export function renderSqlPanel(sql: string): string {
  return `<div class="sql-panel"><pre><code>${highlightSql(sql)}</code></pre></div>`;
}

export function renderAttemptTimeline(attempts: AttemptInfo[]): string {
  const entries = attempts
    .map((attempt) => {
      const ok = attempt.outcome === "success";
      const label = ok
        ? `<span class="attempt-ok">succeeded</span>`
        : `<span class="attempt-err">${escapeHtml(attempt.error_kind ?? "error")}: ${escapeHtml(
            attempt.error ?? "",
          )}</span>`;
      return (
        `<details class="attempt"${ok ? " open" : ""}>` +
        `<summary>attempt ${attempt.index} ${label}</summary>` +
        `<pre><code>${highlightSql(attempt.sql)}</code></pre>` +
        `</details>`
      );
    })
    .join("");
  return `<div class="timeline" data-count="${attempts.length}">${entries}</div>`;
}

export interface TablePage {
  html: string;
  pageCount: number;
}

export function renderResultsTable(
  columns: string[],
  rows: unknown[][],
  page = 0,
  pageSize = 20,
  displayTruncated = false,
): TablePage {
  const pageCount = Math.max(1, Math.ceil(rows.length / pageSize));
  const clamped = Math.min(Math.max(page, 0), pageCount - 1);
  const slice = rows.slice(clamped * pageSize, (clamped + 1) * pageSize);
  const head = columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = slice
    .map(
      (row) =>
        `<tr>${row
          .map((cell) => `<td>${cell === null ? "<i>null</i>" : escapeHtml(cell)}</td>`)
          .join("")}</tr>`,
    )
    .join("");
  const note = displayTruncated
    ? `<p class="truncated-note">showing the first ${rows.length} rows (display cap)</p>`
    : "";
  const pager =
    pageCount > 1
      ? `<div class="pager">page ${clamped + 1} / ${pageCount}` +
        `<button data-page="${clamped - 1}" ${clamped === 0 ? "disabled" : ""}>prev</button>` +
        `<button data-page="${clamped + 1}" ${clamped === pageCount - 1 ? "disabled" : ""}>next</button></div>`
      : "";
  return {
    html:
      `<div class="results" data-rows="${rows.length}">` +
      `<table><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>` +
      `${note}${pager}</div>`,
    pageCount,
  };
}

export function renderAnswerPanel(response: QueryResponse, page = 0): string {
  const sections: string[] = [];
  sections.push(renderSqlPanel(response.final_sql));
  sections.push(renderAttemptTimeline(response.attempts));
  if (response.outcome === "success") {
    sections.push(
      renderResultsTable(
        response.columns ?? [],
        response.rows ?? [],
        page,
        20,
        response.display_truncated ?? false,
      ).html,
    );
  } else {
    sections.push(
      `<div class="exhausted-banner">No executable SQL after ${response.attempts.length} attempts.` +
        `<pre>${escapeHtml(response.last_error ?? "")}</pre></div>`,
    );
  }
  return `<section class="answer">${sections.join("")}</section>`;
}

export function renderHintsPanel(hints: HintEntry[] | null): string {
  if (hints === null) {
    return (
      `<div class="hints-empty">No hints yet for this database.` +
      `<button id="curate-btn">Curate from history</button></div>`
    );
  }
  if (hints.length === 0) {
    return `<div class="hints-empty">The curated hint set is empty.</div>`;
  }
  const cards = hints
    .map(
      (hint) =>
        `<article class="hint-card"><p>${escapeHtml(hint.description)}</p>` +
        `<pre><code>${highlightSql(hint.sql_query)}</code></pre></article>`,
    )
    .join("");
  return `<div class="hints" data-count="${hints.length}">${cards}</div>`;
}

export function renderCurationInProgress(): string {
  return `<div class="hints-conflict">Curation already in progress for this database; try again shortly.</div>`;
}

export function renderErrorBanner(message: string, retryable = true): string {
  const button = retryable ? `<button id="retry-btn">retry</button>` : "";
  return `<div class="error-banner">${escapeHtml(message)}${button}</div>`;
}

export function renderValidationErrors(detail: unknown): string {
  const items: string[] = [];
  if (Array.isArray(detail)) {
    for (const entry of detail) {
      if (entry && typeof entry === "object" && "loc" in entry && "msg" in entry) {
        const loc = (entry as { loc: unknown[] }).loc.join(".");
        items.push(`<li><code>${escapeHtml(loc)}</code>: ${escapeHtml((entry as { msg: unknown }).msg)}</li>`);
      }
    }
  }
  if (items.length === 0) {
    items.push(`<li>${escapeHtml(String(detail))}</li>`);
  }
  return `<div class="field-errors"><ul>${items.join("")}</ul></div>`;
}

export function renderDatabaseOption(dbId: string, tableCount: number, hasHints: boolean): string {
  const badge = hasHints ? " (hints ready)" : "";
  return `<option value="${escapeHtml(dbId)}">${escapeHtml(dbId)} — ${tableCount} tables${badge}</option>`;
}
