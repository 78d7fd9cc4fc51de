/** Typed client for the review service HTTP endpoints. */

import type { CriterionKey, NotePayload, SessionInfo, SubmitAck, Verdict } from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** A structured service error; `code` mirrors the service's error codes. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

interface ErrorBody {
  detail?: { code?: string; message?: string } | string;
}

async function toApiError(response: Response): Promise<ApiError> {
  let code = 'http_error';
  let message = `request failed with status ${response.status}`;
  try {
    const body = (await response.json()) as ErrorBody;
    if (typeof body.detail === 'object' && body.detail !== null) {
      code = body.detail.code ?? code;
      message = body.detail.message ?? message;
    } else if (typeof body.detail === 'string') {
      message = body.detail;
    }
  } catch {
    // Non-JSON error body; keep the generic message.
  }
  return new ApiError(code, message, response.status);
}

export class ReviewApi {
  private readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      throw await toApiError(response);
    }
    return (await response.json()) as T;
  }

  createSession(reviewerId: string, seed: number, runId?: string): Promise<SessionInfo> {
    return this.request<SessionInfo>('/sessions', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ reviewer_id: reviewerId, seed, run_id: runId ?? null }),
    });
  }

  nextItem(sessionId: string): Promise<NotePayload> {
    return this.request<NotePayload>(`/sessions/${encodeURIComponent(sessionId)}/next`);
  }

  submitRating(
    sessionId: string,
    noteId: string,
    verdicts: Record<CriterionKey, Verdict>,
  ): Promise<SubmitAck> {
    return this.request<SubmitAck>(`/sessions/${encodeURIComponent(sessionId)}/ratings`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ note_id: noteId, verdicts }),
    });
  }

  exportUrl(runId: string, criterion: CriterionKey): string {
    return `${this.baseUrl}/runs/${encodeURIComponent(runId)}/export.csv?criterion=${criterion}`;
  }
}
