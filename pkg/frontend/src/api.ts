// Typed client for the query service. Every function maps one endpoint and
// surfaces non-2xx responses as ApiError so the UI can branch on status.

export interface DatabaseInfo {
  db_id: string;
  table_count: number;
  has_hints: boolean;
}

export interface SchemaText {
  statements: string[];
  rendered: string;
}

export interface HintEntry {
  description: string;
  sql_query: string;
}

export interface AttemptInfo {
  index: number;
  sql: string;
  outcome: "success" | "exec_error";
  error_kind?: string | null;
  error?: string | null;
}

export interface QueryResponse {
  db_id: string;
  final_sql: string;
  attempts: AttemptInfo[];
  ledger_delta: Record<string, number>;
  outcome: "success" | "exhausted";
  columns?: string[];
  rows?: unknown[][];
  display_truncated?: boolean;
  last_error?: string;
}

export interface HistoryUpload {
  id?: string;
  sql: string;
  question?: string;
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(typeof detail === "string" ? detail : `request failed with ${status}`);
    this.status = status;
    this.detail = detail;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(path, init);
  } catch (error) {
    throw new ApiError(0, `network failure: ${String(error)}`);
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    body = null;
  }
  if (!response.ok) {
    const detail =
      body && typeof body === "object" && "detail" in body
        ? (body as { detail: unknown }).detail
        : body;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

function post<T>(path: string, payload: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export function listDatabases(): Promise<DatabaseInfo[]> {
  return request<DatabaseInfo[]>("/api/databases");
}

export function getSchema(dbId: string): Promise<SchemaText> {
  return request<SchemaText>(`/api/databases/${encodeURIComponent(dbId)}/schema`);
}

export function getHints(dbId: string): Promise<HintEntry[]> {
  return request<HintEntry[]>(`/api/databases/${encodeURIComponent(dbId)}/hints`);
}

export function curateHints(
  dbId: string,
  history: HistoryUpload[],
): Promise<HintEntry[]> {
  return post<HintEntry[]>(
    `/api/databases/${encodeURIComponent(dbId)}/hints/curate`,
    { history },
  );
}

export function submitQuery(
  dbId: string,
  question: string,
  useHints: boolean,
): Promise<QueryResponse> {
  return post<QueryResponse>("/api/query", {
    db_id: dbId,
    question,
    use_hints: useHints,
  });
}
