/**
 * Client for the labeling service's /api/v1 endpoints.
 */

import type {
  ConflictDetail,
  Label,
  PatentDetail,
  QueueResponse,
  SessionStats,
  SubmitResponse,
} from './types.js';

// Error envelope the service returns for every non-2xx response.
interface ErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail?: unknown,
  ) {
    super(message);
    this.name = 'ApiError';
  }

  conflictDetail(): ConflictDetail | null {
    if (this.code !== 'conflict' || typeof this.detail !== 'object' || this.detail === null) {
      return null;
    }
    return this.detail as ConflictDetail;
  }
}

export class ApiClient {
  private readonly base: string;

  constructor(baseUrl: string) {
    this.base = baseUrl.replace(/\/+$/, '');
  }

  private async request<T>(path: string, options?: RequestInit): Promise<T> {
    const response = await fetch(`${this.base}/api/v1${path}`, {
      ...options,
      headers: { 'Content-Type': 'application/json', ...options?.headers },
    });
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON bodies only happen on proxy/server faults
    }
    if (!response.ok) {
      const err = (body ?? {}) as Partial<ErrorBody>;
      throw new ApiError(response.status, err.code ?? 'error', err.message ?? response.statusText, err.detail);
    }
    return body as T;
  }

  createSession(
    seeds: { patent_id: string; label: Label }[],
    options?: { session_id?: string; rng_seed?: number; config?: Record<string, unknown> },
  ): Promise<{ session_id: string; queue_size: number; labels_total: number }> {
    return this.request('/sessions', {
      method: 'POST',
      body: JSON.stringify({ seeds, ...options }),
    });
  }

  fetchQueue(sessionId: string, k: number, annotatorId: string): Promise<QueueResponse> {
    const params = new URLSearchParams({ k: String(k), annotator_id: annotatorId });
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/queue?${params}`);
  }

  fetchStats(sessionId: string): Promise<SessionStats> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/stats`);
  }

  fetchPatent(patentId: string): Promise<PatentDetail> {
    return this.request(`/patents/${encodeURIComponent(patentId)}`);
  }

  submitLabel(sessionId: string, patentId: string, label: Label, annotatorId: string): Promise<SubmitResponse> {
    return this.request(`/sessions/${encodeURIComponent(sessionId)}/labels`, {
      method: 'POST',
      body: JSON.stringify({ patent_id: patentId, label, annotator_id: annotatorId }),
    });
  }
}
