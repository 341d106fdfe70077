/**
 * Annotation console: one candidate at a time, keyboard-first.
 *
 * All session truth lives server-side; every render is a pure function of
 * the latest service responses, so a page reload reconstructs the same
 * view. The only client-held state that survives a render is the pending
 * judgment (kept so a network failure can be retried without retyping).
 */

import { ApiClient, ApiError } from './api.js';
import type { Label, PatentDetail, QueueItem, SessionStats } from './types.js';

export interface AppOptions {
  baseUrl: string;
  sessionId: string;
  annotatorId: string;
  queueSize?: number;
}

export const KEY_ACCEPT = 'a';
export const KEY_REJECT = 'r';
export const KEY_SKIP = 's';
export const KEY_CLAIMS = 'c';

export const RERANK_NOTICE = 'model updated — queue re-ranked';

interface PendingJudgment {
  patentId: string;
  label: Label;
  failed: boolean;
}

type Phase = 'loading' | 'annotating' | 'complete' | 'error';

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export class AnnotatorApp {
  private readonly api: ApiClient;
  private readonly root: HTMLElement;
  private readonly sessionId: string;
  private readonly annotatorId: string;
  private readonly queueSize: number;

  private phase: Phase = 'loading';
  private queue: QueueItem[] = [];
  private detail: PatentDetail | null = null;
  private stats: SessionStats | null = null;
  private pending: PendingJudgment | null = null;
  private notice = '';
  private errorText = '';
  private claimsExpanded = false;

  private readonly onKeydown = (event: KeyboardEvent) => this.handleKey(event);
  private readonly onClick = (event: Event) => this.handleClick(event);

  constructor(root: HTMLElement, options: AppOptions) {
    this.root = root;
    this.api = new ApiClient(options.baseUrl);
    this.sessionId = options.sessionId;
    this.annotatorId = options.annotatorId;
    this.queueSize = options.queueSize ?? 8;
    root.ownerDocument.addEventListener('keydown', this.onKeydown);
    root.addEventListener('click', this.onClick);
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener('keydown', this.onKeydown);
    this.root.removeEventListener('click', this.onClick);
  }

  current(): QueueItem | null {
    return this.queue[0] ?? null;
  }

  /** Fetch queue and stats, load the head candidate, render. */
  async start(): Promise<void> {
    this.phase = 'loading';
    this.render();
    try {
      await this.refreshQueue();
    } catch (err) {
      this.phase = 'error';
      this.errorText = err instanceof Error ? err.message : String(err);
      this.render();
    }
  }

  private async refreshQueue(): Promise<void> {
    const [queue, stats] = await Promise.all([
      this.api.fetchQueue(this.sessionId, this.queueSize, this.annotatorId),
      this.api.fetchStats(this.sessionId),
    ]);
    this.queue = queue.items;
    this.stats = stats;
    this.claimsExpanded = false;
    if (this.queue.length === 0) {
      this.phase = 'complete';
      this.detail = null;
    } else {
      this.phase = 'annotating';
      await this.loadDetail();
    }
    this.render();
  }

  // Full record for the head candidate: CPC codes now, full claims on expand.
  private async loadDetail(): Promise<void> {
    const head = this.current();
    this.detail = head ? await this.api.fetchPatent(head.patent_id) : null;
  }

  private async advance(): Promise<void> {
    this.queue.shift();
    this.claimsExpanded = false;
    if (this.queue.length === 0) {
      await this.refreshQueue();
    } else {
      await this.loadDetail();
      this.render();
    }
  }

  async judge(label: Label): Promise<void> {
    const head = this.current();
    if (!head || this.pending || this.phase !== 'annotating') return;
    this.pending = { patentId: head.patent_id, label, failed: false };
    this.notice = '';
    this.render();
    await this.submitPending();
  }

  async retry(): Promise<void> {
    if (!this.pending || !this.pending.failed) return;
    this.pending.failed = false;
    this.render();
    await this.submitPending();
  }

  private async submitPending(): Promise<void> {
    const pending = this.pending;
    if (!pending) return;
    try {
      const resp = await this.api.submitLabel(
        this.sessionId, pending.patentId, pending.label, this.annotatorId,
      );
      this.pending = null;
      if (resp.retrained) {
        this.notice = RERANK_NOTICE;
        await this.refreshQueue();
      } else {
        this.stats = await this.api.fetchStats(this.sessionId);
        await this.advance();
      }
    } catch (err) {
      if (err instanceof ApiError) {
        this.pending = null;
        const conflict = err.conflictDetail();
        if (conflict) {
          this.notice = `already labeled ${conflict.existing_label}`
            + ` by ${conflict.existing_annotator_id} — skipped`;
          this.stats = await this.api.fetchStats(this.sessionId);
          await this.advance();
        } else {
          // validation and other service errors render verbatim
          this.notice = err.message;
          this.render();
        }
      } else {
        // network failure: keep the judgment, offer retry
        pending.failed = true;
        this.render();
      }
    }
  }

  async skip(): Promise<void> {
    if (this.pending || this.phase !== 'annotating') return;
    this.notice = '';
    await this.advance();
  }

  toggleClaims(): void {
    if (this.phase !== 'annotating') return;
    this.claimsExpanded = !this.claimsExpanded;
    this.render();
  }

  private handleKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === 'INPUT' || target.tagName === 'TEXTAREA')) return;
    switch (event.key) {
      case KEY_ACCEPT:
        void this.judge('positive');
        break;
      case KEY_REJECT:
        void this.judge('negative');
        break;
      case KEY_SKIP:
        void this.skip();
        break;
      case KEY_CLAIMS:
        this.toggleClaims();
        break;
    }
  }

  private handleClick(event: Event): void {
    const target = event.target as HTMLElement | null;
    if (!target) return;
    const action = target.closest('[data-action]')?.getAttribute('data-action');
    switch (action) {
      case 'accept':
        void this.judge('positive');
        break;
      case 'reject':
        void this.judge('negative');
        break;
      case 'skip':
        void this.skip();
        break;
      case 'claims':
        this.toggleClaims();
        break;
      case 'retry':
        void this.retry();
        break;
    }
  }

  private render(): void {
    this.root.innerHTML = [
      this.renderHeader(),
      this.renderNotice(),
      this.renderBody(),
      this.renderStats(),
    ].join('');
  }

  private renderHeader(): string {
    return `<header class="bar">
      <span id="session-id">session ${esc(this.sessionId)}</span>
      <span id="annotator-id">annotator ${esc(this.annotatorId)}</span>
    </header>`;
  }

  private renderNotice(): string {
    if (this.pending?.failed) {
      return `<div id="notice" class="notice error">
        network error — judgment not submitted
        <button type="button" data-action="retry" id="btn-retry">retry</button>
      </div>`;
    }
    if (!this.notice) return '<div id="notice" class="notice empty"></div>';
    return `<div id="notice" class="notice">${esc(this.notice)}</div>`;
  }

  private renderBody(): string {
    if (this.phase === 'loading') return '<main id="loading">loading…</main>';
    if (this.phase === 'error') {
      return `<main id="fatal">cannot reach service: ${esc(this.errorText)}</main>`;
    }
    if (this.phase === 'complete') return this.renderComplete();
    return this.renderCandidate() + this.renderQueuePreview();
  }

  private renderComplete(): string {
    const s = this.stats;
    return `<main id="completion">
      <h2>queue empty — session complete</h2>
      <p>${s ? `${s.labels_total} labels, ${s.retrain_count} retrains,
        ${s.pool_size} unlabeled remaining` : ''}</p>
    </main>`;
  }

  private renderCandidate(): string {
    const item = this.current();
    if (!item) return '';
    const codes = this.detail?.cpc_codes ?? [];
    const claims = this.claimsExpanded
      ? `<pre id="candidate-claims" class="claims full">${esc(this.detail?.claims ?? '')}</pre>`
      : `<pre id="candidate-claims" class="claims excerpt">${esc(item.claims_excerpt)}</pre>`;
    const disabled = this.pending ? 'disabled' : '';
    return `<main id="candidate" data-patent-id="${esc(item.patent_id)}">
      <h2 id="candidate-title">${esc(item.title)}</h2>
      <div class="meta">
        <span id="candidate-id">${esc(item.patent_id)}</span>
        <span id="candidate-uncertainty">uncertainty ${item.uncertainty.toFixed(4)}</span>
        <span id="candidate-codes">${codes.map(esc).join(' ')}</span>
      </div>
      <p id="candidate-abstract">${esc(item.abstract)}</p>
      <div class="claims-block">
        <button type="button" data-action="claims" id="btn-claims" ${disabled}>
          ${this.claimsExpanded ? 'collapse claims [c]' : 'expand claims [c]'}
        </button>
        ${claims}
      </div>
      <div class="controls">
        <button type="button" data-action="accept" id="btn-accept" ${disabled}>accept [a]</button>
        <button type="button" data-action="reject" id="btn-reject" ${disabled}>reject [r]</button>
        <button type="button" data-action="skip" id="btn-skip" ${disabled}>skip [s]</button>
      </div>
    </main>`;
  }

  private renderQueuePreview(): string {
    const rows = this.queue.slice(1, 6).map(
      (item) => `<li data-patent-id="${esc(item.patent_id)}">
        <span class="uncertainty">${item.uncertainty.toFixed(4)}</span>
        ${esc(item.title)}</li>`,
    );
    return `<ol id="queue-preview">${rows.join('')}</ol>`;
  }

  private renderStats(): string {
    const s = this.stats;
    if (!s) return '<footer id="stats"></footer>';
    const kappa = s.kappa_pairs.map(
      (p) => `<span class="kappa-pair">${p.annotators.map(esc).join(' / ')}
        κ ${p.kappa.toFixed(2)} (n=${p.overlap})</span>`,
    );
    return `<footer id="stats">
      <span id="stat-labels">labels ${s.labels_total}</span>
      <span id="stat-retrains">retrains ${s.retrain_count}</span>
      <span id="stat-pool">pool ${s.pool_size}</span>
      <span id="stat-kappa">${kappa.length ? kappa.join(' ') : 'κ n/a'}</span>
    </footer>`;
  }
}

export function createApp(root: HTMLElement, options: AppOptions): AnnotatorApp {
  return new AnnotatorApp(root, options);
}
