import { afterEach, describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError } from '../src/api';
import { installFetch } from './fake';

afterEach(() => {
  vi.unstubAllGlobals();
});

describe('ApiClient', () => {
  it('builds /api/v1 urls from the base setting, tolerating trailing slashes', async () => {
    const calls = installFetch(() => ({ status: 200, body: { items: [] } }));
    const client = new ApiClient('http://svc.test:8000/');
    await client.fetchQueue('s 1', 5, 'ann/a');
    expect(calls[0]!.path).toBe('/api/v1/sessions/s%201/queue?k=5&annotator_id=ann%2Fa');
  });

  it('maps service error envelopes onto ApiError', async () => {
    installFetch(() => ({
      status: 409,
      body: {
        code: 'conflict',
        message: 'patent already labeled',
        detail: { patent_id: 'P1', existing_label: 'positive', existing_annotator_id: 'x' },
      },
    }));
    const client = new ApiClient('http://svc.test');
    const err = await client
      .submitLabel('s1', 'P1', 'negative', 'y')
      .then(() => null, (e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    const apiErr = err as ApiError;
    expect(apiErr.status).toBe(409);
    expect(apiErr.code).toBe('conflict');
    expect(apiErr.conflictDetail()?.existing_label).toBe('positive');
  });

  it('conflictDetail is null for non-conflict errors', async () => {
    installFetch(() => ({ status: 404, body: { code: 'not_found', message: 'nope' } }));
    const client = new ApiClient('http://svc.test');
    const err = (await client.fetchPatent('P404').catch((e: unknown) => e)) as ApiError;
    expect(err.code).toBe('not_found');
    expect(err.conflictDetail()).toBeNull();
  });

  it('survives non-JSON error bodies', async () => {
    globalThis.fetch = (async () =>
      new Response('<html>boom</html>', { status: 502, statusText: 'Bad Gateway' })) as typeof fetch;
    const client = new ApiClient('http://svc.test');
    const err = (await client.fetchStats('s1').catch((e: unknown) => e)) as ApiError;
    expect(err.status).toBe(502);
    expect(err.message).toBe('Bad Gateway');
  });
});
