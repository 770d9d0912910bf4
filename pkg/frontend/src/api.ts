import type {
  CatalogEntry,
  CreateSessionResponse,
  DatasetInfo,
  QueryPayload,
  SessionReport,
  StepPayload,
} from "./types.js";

export class ServiceError extends Error {
  constructor(public status: number, public detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function parseError(response: Response): Promise<never> {
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail) detail = JSON.stringify(body.detail);
  } catch {
    // keep the status text
  }
  throw new ServiceError(response.status, detail);
}

/** Thin fetch client; every submit is sent exactly once (no retries). */
export class SessionClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response);
    return response.json() as Promise<T>;
  }

  datasets(): Promise<DatasetInfo[]> {
    return this.get("/datasets");
  }

  catalog(): Promise<Record<string, CatalogEntry[]>> {
    return this.get("/catalog");
  }

  createSession(dataset: string, policy: string, mirror: boolean): Promise<CreateSessionResponse> {
    return this.post("/sessions", { dataset, policy, mirror });
  }

  submitQuery(sessionId: string, query: QueryPayload): Promise<StepPayload> {
    return this.post(`/sessions/${sessionId}/query`, query);
  }

  report(sessionId: string): Promise<SessionReport> {
    return this.get(`/sessions/${sessionId}/report`);
  }
}
