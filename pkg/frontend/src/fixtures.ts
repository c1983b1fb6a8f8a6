// Loader for the recorded API session (see ../record_fixtures.py).

import { readFileSync } from "node:fs";

export interface RecordedScenario {
  method: string;
  path: string;
  request_body: unknown;
  status: number;
  response: unknown;
}

export type RecordedSession = Record<string, RecordedScenario>;

export function loadRecordedSession(): RecordedSession {
  const url = new URL("./fixtures/recorded.json", import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as RecordedSession;
}

/** A fetch stub that serves one recorded scenario per (method, path) pair. */
export function fetchFromRecording(session: RecordedSession): typeof fetch {
  return async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = typeof input === "string" ? input : input.toString();
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : null;
    for (const scenario of Object.values(session)) {
      if (scenario.method !== method || scenario.path !== url) continue;
      if (
        method === "POST" &&
        JSON.stringify(scenario.request_body) !== JSON.stringify(body)
      ) {
        continue;
      }
      return new Response(JSON.stringify(scenario.response), {
        status: scenario.status,
        headers: { "Content-Type": "application/json" },
      });
    }
    throw new Error(`no recorded scenario for ${method} ${url} ${JSON.stringify(body)}`);
  };
}
