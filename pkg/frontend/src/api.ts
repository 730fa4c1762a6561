// Typed client for the sqltailor HTTP JSON API.

export interface DocumentRow {
  id: string;
  class: string;
  score: number;
  tokens: number;
}

export interface AskResponse {
  question_id: string;
  sql: string;
  sql_found: boolean;
  pipeline_used: 'specialized' | 'generic';
  documents: DocumentRow[];
  prompt_tokens: number;
}

export interface ArmStats {
  count: number;
  avg: number;
}

export interface StatsResponse {
  epsilon: number;
  window: number;
  arms: Record<string, ArmStats>;
  allocation: Record<string, number | string> | null;
  weights: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<ApiError> {
  let detail = response.statusText || 'request failed';
  try {
    const body = (await response.json()) as { detail?: string };
    if (body && typeof body.detail === 'string') detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, detail);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(this.url(path), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  async ask(question: string): Promise<AskResponse> {
    return this.post<AskResponse>('/ask', { question });
  }

  async feedback(questionId: string, useful: boolean): Promise<void> {
    await this.post<{ ok: boolean }>('/feedback', { question_id: questionId, useful });
  }

  async stats(): Promise<StatsResponse> {
    const response = await this.fetchFn(this.url('/stats'));
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as StatsResponse;
  }

  async health(): Promise<boolean> {
    try {
      const response = await this.fetchFn(this.url('/health'));
      return response.ok;
    } catch {
      return false;
    }
  }
}
