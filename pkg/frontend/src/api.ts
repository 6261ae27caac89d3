// Typed client for the experiment service. The UI talks to the engine only
// through these five endpoints; nothing here imports server code.

export interface CreateSessionResponse {
  token: string;
  region: string;
  initial: string[];
  step: number;
  watch_count: number;
}

export interface RecommendationsResponse {
  items: string[];
  step: number;
  degraded: boolean;
}

export interface StepAck {
  step: number;
  done: boolean;
  selected: string | null;
}

export type Ratings = Record<string, number>;

export class ApiError extends Error {
  constructor(

    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`service error ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

/** What the state machine needs from the backend; tests substitute fakes. */
export interface ExperimentApi {
  regions(): Promise<string[]>;
  createSession(region: string): Promise<CreateSessionResponse>;
  recommendations(token: string, current: string): Promise<RecommendationsResponse>;
  recordStep(token: string, position: number | null, ratings: Ratings): Promise<StepAck>;
}

async function parse<T>(res: Response): Promise<T> {
  if (res.ok) return (await res.json()) as T;
  let detail = res.statusText;
  try {
    const body = (await res.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(res.status, detail);
}

export class HttpExperimentApi implements ExperimentApi {
  constructor(private readonly baseUrl: string) {}

  async regions(): Promise<string[]> {
    const res = await fetch(`${this.baseUrl}/regions`);
    const body = await parse<{ regions: string[] }>(res);
    return body.regions;
  }

  async createSession(region: string): Promise<CreateSessionResponse> {
    const res = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ region }),
    });
    return parse(res);
  }

  async recommendations(token: string, current: string): Promise<RecommendationsResponse> {
    const url = `${this.baseUrl}/sessions/${encodeURIComponent(token)}/recommendations` +
      `?current=${encodeURIComponent(current)}`;
    return parse(await fetch(url));
  }

  async recordStep(token: string, position: number | null, ratings: Ratings): Promise<StepAck> {
    const res = await fetch(`${this.baseUrl}/sessions/${encodeURIComponent(token)}/steps`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(position === null ? { ratings } : { position, ratings }),
    });
    return parse(res);
  }
}
