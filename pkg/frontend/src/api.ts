// Thin fetch client for /api/v1. Non-2xx responses reject with the server's
// {code, message, status} body; network failures reject with code
// "unreachable" so views can show the retry banner.

import type {
  ApiFailure,
  DecisionBody,
  DecisionResponse,
  MetricsPayload,
  TaskDetail,
  TaskSummary,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error implements ApiFailure {
  code: string;
  status: number;

  constructor(failure: ApiFailure) {
    super(failure.message);
    this.code = failure.code;
    this.status = failure.status;
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError({ code: 'unreachable', message: String(err), status: 0 });
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // fall through; non-JSON bodies only matter for errors
    }
    if (!response.ok) {
      const failure = body as Partial<ApiFailure> | null;
      throw new ApiError({
        code: failure?.code ?? 'http_error',
        message: failure?.message ?? `HTTP ${response.status}`,
        status: failure?.status ?? response.status,
      });
    }
    return body as T;
  }

  listPendingTasks(): Promise<TaskSummary[]> {
    return this.request<TaskSummary[]>('/api/v1/tasks?state=pending');
  }

  taskDetail(taskId: string): Promise<TaskDetail> {
    return this.request<TaskDetail>(`/api/v1/tasks/${encodeURIComponent(taskId)}`);
  }

  submitDecision(taskId: string, body: DecisionBody): Promise<DecisionResponse> {
    return this.request<DecisionResponse>(
      `/api/v1/tasks/${encodeURIComponent(taskId)}/decision`,
      {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(body),
      },
    );
  }

  metrics(labelsPath?: string): Promise<MetricsPayload> {
    const query = labelsPath ? `?labels=${encodeURIComponent(labelsPath)}` : '';
    return this.request<MetricsPayload>(`/api/v1/metrics${query}`);
  }
}
