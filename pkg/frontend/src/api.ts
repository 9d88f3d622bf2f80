/**
 * Thin fetch client for the cfx service.
 *
 * explain() keeps the raw response text next to the parsed object: the
 * service guarantees identical requests replay byte-identically, and the
 * round-trip test leans on that by comparing raw bytes, not parsed values.
 */

import type {
  ExplainRequest,
  ExplainResponse,
  InstancesResponse,
  PlafValidation,
  SchemaResponse,
  ServiceError,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly line?: number,
    readonly column?: number,
  ) {
    super(message);
  }
}

export interface RawResult<T> {
  payload: T;
  /** exact bytes of the response body */
  raw: string;
}

async function readError(res: Response): Promise<ApiError> {
  let message = `${res.status} ${res.statusText}`;
  let line: number | undefined;
  let column: number | undefined;
  try {
    const body = (await res.json()) as ServiceError;
    if (body?.error?.message) {
      message = body.error.message;
      line = body.error.line;
      column = body.error.column;
    }
  } catch {
    // non-JSON error body: keep the status line
  }
  return new ApiError(res.status, message, line, column);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    if (!res.ok) throw await readError(res);
    return (await res.json()) as T;
  }

  private async post(path: string, body: unknown, signal?: AbortSignal): Promise<Response> {
    return fetch(this.baseUrl + path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
      signal,
    });
  }

  async health(): Promise<{ status: string; version: string; rows: number }> {
    return this.get('/health');
  }

  async schema(): Promise<SchemaResponse> {
    return this.get('/schema');
  }

  async instances(limit = 20, offset = 0): Promise<InstancesResponse> {
    return this.get(`/instances?limit=${limit}&offset=${offset}`);
  }

  async validatePlaf(text: string): Promise<PlafValidation> {
    const res = await this.post('/plaf/validate', { text });
    if (res.status === 422) {
      const body = (await res.json()) as { error: { message: string; line: number; column: number } };
      return { ok: false, error: { ...body.error, column: body.error.column } };
    }
    if (!res.ok) throw await readError(res);
    return (await res.json()) as PlafValidation;
  }

  async explain(req: ExplainRequest, signal?: AbortSignal): Promise<RawResult<ExplainResponse>> {
    const res = await this.post('/explain', req, signal);
    if (!res.ok) throw await readError(res);
    const raw = await res.text();
    return { payload: JSON.parse(raw) as ExplainResponse, raw };
  }
}
