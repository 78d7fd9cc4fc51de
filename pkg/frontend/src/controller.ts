/**
 * Session controller: owns all review state and talks to the service.
 *
 * The service is authoritative; this class only mirrors the cursor it is
 * given, so a page refresh resumes exactly where the service says.  Entered
 * verdicts survive every failed submission (validation error or network
 * failure) and submission is impossible until all four criteria are set.
 */

import { ApiError, ReviewApi } from './api.js';
import { CRITERIA, type CriterionKey, type Verdict } from './types.js';

export type Phase = 'idle' | 'loading' | 'reviewing' | 'complete' | 'error';

export interface CardState {
  noteId: string;
  text: string;
  position: number;
  total: number;
  verdicts: Partial<Record<CriterionKey, Verdict>>;
}

export interface ControllerState {
  phase: Phase;
  card: CardState | null;
  /** Recoverable problem to show without losing entered input. */
  banner: string | null;
  /** Unrecoverable problem; the session cannot continue. */
  fatal: string | null;
  completedCount: number;
  total: number;
}

type Listener = (state: ControllerState) => void;

export class ReviewController {
  private readonly api: ReviewApi;
  private sessionId: string | null = null;
  private state: ControllerState = {
    phase: 'idle',
    card: null,
    banner: null,
    fatal: null,
    completedCount: 0,
    total: 0,
  };
  private listeners: Listener[] = [];

  constructor(api: ReviewApi) {
    this.api = api;
  }

  getState(): ControllerState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<ControllerState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async start(reviewerId: string, seed: number, runId?: string): Promise<void> {
    this.update({ phase: 'loading', banner: null, fatal: null });
    try {
      const session = await this.api.createSession(reviewerId, seed, runId);
      this.sessionId = session.session_id;
      this.update({ total: session.total, completedCount: session.position - 1 });
      if (session.completed) {
        this.update({ phase: 'complete', card: null });
        return;
      }
      await this.loadNext();
    } catch (error) {
      this.fail(error);
    }
  }

  private async loadNext(): Promise<void> {
    if (this.sessionId === null) {
      return;
    }
    this.update({ phase: 'loading', banner: null });
    try {
      const payload = await this.api.nextItem(this.sessionId);
      this.update({
        phase: 'reviewing',
        card: {
          noteId: payload.note_id,
          text: payload.text,
          position: payload.position,
          total: payload.total,
          verdicts: {},
        },
        completedCount: payload.position - 1,
        total: payload.total,
      });
    } catch (error) {
      if (error instanceof ApiError && error.code === 'session_complete') {
        this.update({ phase: 'complete', card: null });
        return;
      }
      this.fail(error);
    }
  }

  setVerdict(criterion: CriterionKey, verdict: Verdict): void {
    if (this.state.phase !== 'reviewing' || this.state.card === null) {
      return;
    }
    const verdicts = { ...this.state.card.verdicts, [criterion]: verdict };
    this.update({ card: { ...this.state.card, verdicts }, banner: null });
  }

  /** Submission is allowed only once every criterion has a verdict. */
  canSubmit(): boolean {
    const card = this.state.card;
    return (
      this.state.phase === 'reviewing' &&
      card !== null &&
      CRITERIA.every((key) => card.verdicts[key] !== undefined)
    );
  }

  async submit(): Promise<void> {
    const card = this.state.card;
    if (!this.canSubmit() || card === null || this.sessionId === null) {
      return;
    }
    const verdicts = card.verdicts as Record<CriterionKey, Verdict>;
    try {
      const ack = await this.api.submitRating(this.sessionId, card.noteId, verdicts);
      this.update({ completedCount: ack.position, total: ack.total });
      if (ack.completed) {
        this.update({ phase: 'complete', card: null, banner: null });
        return;
      }
      await this.loadNext();
    } catch (error) {
      if (error instanceof ApiError) {
        // Validation problems (duplicate, out-of-order, incomplete) are
        // surfaced without touching the entered verdicts.
        this.update({ banner: `${error.code}: ${error.message}` });
        return;
      }
      this.update({ banner: 'Could not reach the review service; your answers are kept. Retry.' });
    }
  }

  /** Re-attempt after a connectivity banner. */
  async retry(): Promise<void> {
    if (this.state.phase === 'reviewing' && this.canSubmit()) {
      await this.submit();
      return;
    }
    if (this.state.phase === 'reviewing' || this.state.phase === 'loading') {
      await this.loadNext();
    }
  }

  private fail(error: unknown): void {
    const message =
      error instanceof ApiError
        ? `${error.code}: ${error.message}`
        : error instanceof Error
          ? error.message
          : String(error);
    this.update({ phase: 'error', fatal: message });
  }
}
