/** Thin HTTP + server-sent-events client for the steering gateway.
 *
 * One in-flight step request at a time: extra step calls while one is
 * pending are queued and sent in order, matching the gateway's per-session
 * step serialization.
 */

import { SessionState, StepResult } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly field?: string,
  ) {
    super(message);
  }
}

async function parseError(res: Response): Promise<GatewayError> {
  let message = `HTTP ${res.status}`;
  let field: string | undefined;
  try {
    const doc = (await res.json()) as { error?: { message?: string; field?: string } };
    message = doc.error?.message ?? message;
    field = doc.error?.field;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new GatewayError(res.status, message, field);
}

export class GatewayClient {
  private stepChain: Promise<unknown> = Promise.resolve();

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      throw await parseError(res);
    }
    return (await res.json()) as T;
  }

  private async get<T>(path: string): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path);
    if (!res.ok) {
      throw await parseError(res);
    }
    return (await res.json()) as T;
  }

  createSession(request: unknown): Promise<{ session_id: string; state: SessionState }> {
    return this.post("/sessions", request);
  }

  /** Serialized per client: resolves in submission order. */
  step(sessionId: string, request: unknown): Promise<StepResult> {
    const next = this.stepChain.then(() =>
      this.post<StepResult>(`/sessions/${sessionId}/step`, request),
    );
    this.stepChain = next.catch(() => undefined);
    return next;
  }

  state(sessionId: string): Promise<SessionState> {
    return this.get(`/sessions/${sessionId}/state`);
  }

  async stepLog(sessionId: string): Promise<string> {
    const res = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/log`);
    if (!res.ok) {
      throw await parseError(res);
    }
    return res.text();
  }

  healthz(): Promise<{ status: string; schema_version: number }> {
    return this.get("/healthz");
  }
}

export interface EventSourceLike {
  addEventListener(type: string, listener: (ev: { data: string }) => void): void;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

/** Subscribe to pushed step results; returns an unsubscribe function. */
export function openStepEvents(
  baseUrl: string,
  sessionId: string,
  onStep: (result: StepResult) => void,
  onParseError: (raw: string, err: unknown) => void = () => undefined,
  factory: EventSourceFactory = (url) => new EventSource(url) as unknown as EventSourceLike,
): () => void {
  const source = factory(`${baseUrl}/sessions/${sessionId}/events`);
  source.addEventListener("step", (ev) => {
    try {
      onStep(JSON.parse(ev.data) as StepResult);
    } catch (err) {
      onParseError(ev.data, err);
    }
  });
  return () => source.close();
}
