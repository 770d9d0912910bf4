import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import type { SessionReport, StepPayload } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as T;
}

export const fixtures = {
  datasets: () => fixture<unknown[]>("datasets.json"),
  catalog: () => fixture<Record<string, unknown[]>>("catalog.json"),
  created: () => fixture<{ session_id: string }>("created.json"),
  queries: () => fixture<Record<string, unknown>[]>("queries.json"),
  steps: () => fixture<StepPayload[]>("steps.json"),
  report: () => fixture<SessionReport>("report.json"),
};

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function deepEqual(a: unknown, b: unknown): boolean {
  if (a === b) return true;
  if (typeof a !== typeof b || a === null || b === null) return false;
  if (typeof a !== "object") return false;
  const ka = Object.keys(a as object).sort();
  const kb = Object.keys(b as object).sort();
  if (ka.length !== kb.length || ka.some((k, i) => k !== kb[i])) return false;
  return ka.every((k) =>
    deepEqual((a as Record<string, unknown>)[k], (b as Record<string, unknown>)[k]),
  );
}

/**
 * fetch stub replaying the recorded service conversation: session creation,
 * the scripted steps in order (each submitted body must equal the recorded
 * query), then the report.
 */
export function recordedServiceFetch() {
  const steps = fixtures.steps();
  const script = fixtures.queries();
  const state = { served: 0, requests: [] as string[] };
  const fetchFn = async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
    const url = String(input);
    state.requests.push(`${init?.method ?? "GET"} ${url}`);
    if (url.endsWith("/datasets")) return jsonResponse(fixtures.datasets());
    if (url.endsWith("/catalog")) return jsonResponse(fixtures.catalog());
    if (url.endsWith("/sessions") && init?.method === "POST") {
      return jsonResponse(fixtures.created());
    }
    if (url.includes("/query") && init?.method === "POST") {
      const step = steps[state.served];
      if (!step) {
        return jsonResponse({ detail: "BACK at root frame" }, 409);
      }
      const sent = JSON.parse(String(init?.body ?? "{}"));
      const expected = script[state.served];
      if (!deepEqual(sent, expected)) {
        return jsonResponse(
          { detail: `query ${state.served} mismatch: sent ${JSON.stringify(sent)}, ` +
                    `expected ${JSON.stringify(expected)}` },
          422,
        );
      }
      state.served += 1;
      return jsonResponse(step);
    }
    if (url.endsWith("/report")) return jsonResponse(fixtures.report());
    return jsonResponse({ detail: `unexpected ${url}` }, 404);
  };
  return { fetchFn: fetchFn as typeof fetch, state };
}
