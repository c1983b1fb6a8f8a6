// Client-side session state: an append-only history per database plus the
// hints toggle. One query may be in flight at a time.

import type { AttemptInfo, QueryResponse } from "./api.js";

export interface SessionEntry {
  question: string;
  final_sql: string;
  outcome: "success" | "exhausted";
  attempts: AttemptInfo[];
  preview: { columns: string[]; rows: unknown[][] } | null;
  usedHints: boolean;
}

export class QuerySession {
  readonly dbId: string;
  useHints = true;
  private entries: SessionEntry[] = [];
  private pending = false;

  constructor(dbId: string) {
    this.dbId = dbId;
  }

  get history(): readonly SessionEntry[] {
    return this.entries;
  }

  get isPending(): boolean {
    return this.pending;
  }

  /** Claim the single in-flight slot; returns the hints flag to send. */
  begin(): boolean {
    if (this.pending) {
      throw new Error("a query is already in flight for this session");
    }
    this.pending = true;
    return this.useHints;
  }

  /** Record a completed answer; history only ever grows. */
  complete(question: string, usedHints: boolean, response: QueryResponse): SessionEntry {
    const entry: SessionEntry = {
      question,
      final_sql: response.final_sql,
      outcome: response.outcome,
      attempts: response.attempts,
      preview:
        response.outcome === "success"
          ? { columns: response.columns ?? [], rows: response.rows ?? [] }
          : null,
      usedHints,
    };
    this.entries.push(entry);
    this.pending = false;
    return entry;
  }

  /** Release the in-flight slot after a transport or validation failure. */
  fail(): void {
    this.pending = false;
  }
}
