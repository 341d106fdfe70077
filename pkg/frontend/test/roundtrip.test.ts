// Annotation round trip against the real service: ascending-uncertainty
// queue, ten labels with the re-rank notice exactly on the tenth, and a
// deliberately raced duplicate taking the conflict path.

import { afterAll, beforeAll, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api';
import { AnnotatorApp, createApp, RERANK_NOTICE } from '../src/app';
import { startService, type LiveService } from './live';

const SESSION_ID = 'ui-roundtrip';
const ANNOTATOR = 'ann-ui';

let svc: LiveService;
let client: ApiClient;
let app: AnnotatorApp;
let root: HTMLElement;
let seedCount: number;

function press(key: string) {
  document.dispatchEvent(new KeyboardEvent('keydown', { key, bubbles: true }));
}

function text(selector: string): string {
  return root.querySelector(selector)?.textContent?.replace(/\s+/g, ' ').trim() ?? '';
}

function currentPatentId(): string {
  return root.querySelector('#candidate')?.getAttribute('data-patent-id') ?? '';
}

beforeAll(async () => {
  svc = await startService();
  client = new ApiClient(svc.baseUrl);
  const seeds = [
    ...svc.positives.map((patent_id) => ({ patent_id, label: 'positive' as const })),
    ...svc.negatives.map((patent_id) => ({ patent_id, label: 'negative' as const })),
  ];
  seedCount = seeds.length;
  const created = await client.createSession(seeds, { session_id: SESSION_ID, rng_seed: 3 });
  expect(created.session_id).toBe(SESSION_ID);
  expect(created.labels_total).toBe(seedCount);

  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById('app')!;
  app = createApp(root, {
    baseUrl: svc.baseUrl,
    sessionId: SESSION_ID,
    annotatorId: ANNOTATOR,
    queueSize: 8,
  });
  await app.start();
});

afterAll(async () => {
  app?.destroy();
  await svc?.stop();
});

describe('annotation round trip', () => {
  it('renders a queue ordered by ascending uncertainty, matching the service', async () => {
    const raw = await client.fetchQueue(SESSION_ID, 8, 'probe');
    const uncertainties = raw.items.map((i) => i.uncertainty);
    expect(uncertainties.length).toBe(8);
    for (let i = 1; i < uncertainties.length; i += 1) {
      expect(uncertainties[i]!).toBeGreaterThanOrEqual(uncertainties[i - 1]!);
    }

    expect(currentPatentId()).toBe(raw.items[0]!.patent_id);
    const shown = [
      Number(text('#candidate-uncertainty').replace('uncertainty ', '')),
      ...[...root.querySelectorAll('#queue-preview .uncertainty')].map(
        (el) => Number(el.textContent),
      ),
    ];
    expect(shown.length).toBe(6); // candidate + 5 preview rows
    for (let i = 1; i < shown.length; i += 1) {
      expect(shown[i]!).toBeGreaterThanOrEqual(shown[i - 1]!);
    }
  });

  it('shows the re-rank notice exactly on the 10th label', async () => {
    for (let i = 1; i <= 10; i += 1) {
      press(i % 2 === 1 ? 'a' : 'r');
      await vi.waitFor(
        () => expect(text('#stat-labels')).toBe(`labels ${seedCount + i}`),
        { timeout: 20_000 },
      );
      if (i < 10) {
        expect(text('#notice')).not.toContain(RERANK_NOTICE);
      } else {
        expect(text('#notice')).toBe(RERANK_NOTICE);
      }
    }
    const stats = await client.fetchStats(SESSION_ID);
    expect(stats.labels_total).toBe(seedCount + 10);
    expect(stats.retrain_count).toBe(2); // initialization + the 10-label cadence
    expect(text('#stat-retrains')).toBe('retrains 2');
  });

  it('takes the conflict path when a duplicate label loses the race', async () => {
    const contested = currentPatentId();
    expect(contested).not.toBe('');

    // another annotator labels the same patent first
    const rival = await client.submitLabel(SESSION_ID, contested, 'negative', 'ann-rival');
    expect(rival.retrained).toBe(false);

    press('a'); // our judgment now races a label that already landed
    await vi.waitFor(
      () => expect(text('#notice')).toContain('already labeled negative by ann-rival'),
      { timeout: 20_000 },
    );
    expect(text('#notice')).toContain('skipped');
    expect(currentPatentId()).not.toBe(contested);

    // the disagreement is the overlap that feeds pairwise kappa
    const stats = await client.fetchStats(SESSION_ID);
    expect(stats.kappa_pairs).toHaveLength(1);
    expect(stats.kappa_pairs[0]!.annotators).toEqual(['ann-rival', ANNOTATOR].sort());
    expect(stats.kappa_pairs[0]!.overlap).toBe(1);
    expect(text('#stat-kappa')).toContain('ann-rival');
  });
});
