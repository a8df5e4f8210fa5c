// Typed client for the qarag JSON API. The base URL can be injected at
// runtime via window.QARAG_API_BASE (same origin by default).

export interface ContextCard {
  doc_id: string;
  chunk_index: number;
  score: number;
  text: string;
  source_track: string;
}

export interface AskResponse {
  answer: string;
  contexts: ContextCard[];
  hypothetical_texts: string[];
  timings_ms: Record<string, number>;
  strategy: string;
}

export interface StrategyInfo {
  kind: string;
  pool_size: number;
  question_share: number;
  extra_queries: number;
  top_n: number;
}

export interface HealthInfo {
  status: string;
  index_size: number;
  dimension: number;
}

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

export interface QaragApi {
  ask(question: string, strategy: string): Promise<AskResponse>;
  strategies(): Promise<StrategyInfo[]>;
  health(): Promise<HealthInfo>;
}

async function readError(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // fall through to the generic message
  }
  return `request failed with HTTP ${response.status}`;
}

export class HttpApi implements QaragApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path);
    if (!response.ok) throw new ApiError(await readError(response), response.status);
    return response.json() as Promise<T>;
  }

  async ask(question: string, strategy: string): Promise<AskResponse> {
    const response = await this.fetchFn(this.baseUrl + "/api/ask", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ question, strategy }),
    });
    if (!response.ok) throw new ApiError(await readError(response), response.status);
    return response.json() as Promise<AskResponse>;
  }

  async strategies(): Promise<StrategyInfo[]> {
    const body = await this.get<{ strategies: StrategyInfo[] }>("/api/strategies");
    return body.strategies;
  }

  health(): Promise<HealthInfo> {
    return this.get<HealthInfo>("/api/health");
  }
}

declare global {
  interface Window {
    QARAG_API_BASE?: string;
  }
}

export function defaultApi(): QaragApi {
  const base = typeof window !== "undefined" ? window.QARAG_API_BASE ?? "" : "";
  return new HttpApi(base);
}
