/**
 * In-memory stand-in for the review service, speaking the same HTTP
 * protocol through a fetch-compatible function.  Mirrors the service's
 * validation rules (incomplete / out-of-order / duplicate submissions) so
 * client tests exercise the real error paths.
 */

import type { FetchLike } from '../src/api.js';
import { CRITERIA } from '../src/types.js';

interface FakeSession {
  sessionId: string;
  reviewerId: string;
  seed: number;
  order: number[];
  cursor: number;
  rated: Set<string>;
}

export interface FakeNote {
  id: string;
  text: string;
}

function shuffled(n: number, seed: number): number[] {
  // Deterministic permutation; the algorithm only needs to be stable here.
  const order = Array.from({ length: n }, (_, i) => i);
  let state = seed + 1;
  for (let i = n - 1; i > 0; i -= 1) {
    state = (state * 48271) % 2147483647;
    const j = state % (i + 1);
    const a = order[i]!;
    order[i] = order[j]!;
    order[j] = a;
  }
  return order;
}

export class FakeService {
  readonly notes: FakeNote[];
  readonly sessions = new Map<string, FakeSession>();
  readonly ratings = new Map<string, Record<string, string>>();
  /** When > 0, that many upcoming requests fail at the network level. */
  failNextRequests = 0;
  requestLog: string[] = [];

  constructor(notes: FakeNote[]) {
    this.notes = notes;
  }

  fetch: FetchLike = async (input, init) => {
    this.requestLog.push(input);
    if (this.failNextRequests > 0) {
      this.failNextRequests -= 1;
      throw new TypeError('network down');
    }
    const url = new URL(input, 'http://fake.test');
    const method = (init?.method ?? 'GET').toUpperCase();
    const body = init?.body ? (JSON.parse(String(init.body)) as Record<string, unknown>) : {};

    if (method === 'POST' && url.pathname === '/sessions') {
      return this.createSession(body);
    }
    const nextMatch = url.pathname.match(/^\/sessions\/([^/]+)\/next$/);
    if (method === 'GET' && nextMatch) {
      return this.nextItem(nextMatch[1]!);
    }
    const rateMatch = url.pathname.match(/^\/sessions\/([^/]+)\/ratings$/);
    if (method === 'POST' && rateMatch) {
      return this.submit(rateMatch[1]!, body);
    }
    return error(404, 'not_found', `no route ${method} ${url.pathname}`);
  };

  private createSession(body: Record<string, unknown>): Response {
    const reviewerId = String(body.reviewer_id ?? '');
    const seed = Number(body.seed ?? 0);
    let session = [...this.sessions.values()].find((s) => s.reviewerId === reviewerId);
    if (!session) {
      session = {
        sessionId: `s${this.sessions.size + 1}-${reviewerId}`,
        reviewerId,
        seed,
        order: shuffled(this.notes.length, seed),
        cursor: 0,
        rated: new Set(),
      };
      this.sessions.set(session.sessionId, session);
    } else if (session.seed !== seed) {
      return error(409, 'seed_conflict', 'existing session uses another seed');
    }
    return ok({
      session_id: session.sessionId,
      reviewer_id: reviewerId,
      position: session.cursor + 1,
      total: this.notes.length,
      completed: session.cursor >= this.notes.length,
    });
  }

  private nextItem(sessionId: string): Response {
    const session = this.sessions.get(sessionId);
    if (!session) {
      return error(404, 'unknown_session', `no session ${sessionId}`);
    }
    if (session.cursor >= session.order.length) {
      return error(409, 'session_complete', 'all notes have been rated');
    }
    const note = this.notes[session.order[session.cursor]!]!;
    return ok({
      session_id: sessionId,
      note_id: note.id,
      text: note.text,
      position: session.cursor + 1,
      total: this.notes.length,
    });
  }

  private submit(sessionId: string, body: Record<string, unknown>): Response {
    const session = this.sessions.get(sessionId);
    if (!session) {
      return error(404, 'unknown_session', `no session ${sessionId}`);
    }
    const verdicts = (body.verdicts ?? {}) as Record<string, string>;
    const missing = CRITERIA.filter((c) => !(c in verdicts));
    const invalid = Object.entries(verdicts).filter(
      ([key, value]) => !CRITERIA.includes(key as never) || !['TRUE', 'FALSE'].includes(value),
    );
    if (missing.length > 0 || invalid.length > 0) {
      return error(422, 'incomplete_submission', `missing ${missing.join(',')}`);
    }
    const noteId = String(body.note_id ?? '');
    if (session.rated.has(noteId)) {
      return error(409, 'duplicate_submission', `${noteId} already rated`);
    }
    const current = this.notes[session.order[session.cursor]!];
    if (!current || current.id !== noteId) {
      return error(409, 'out_of_order', `expected ${current?.id}, got ${noteId}`);
    }
    session.rated.add(noteId);
    session.cursor += 1;
    this.ratings.set(`${noteId}:${session.reviewerId}`, { ...verdicts });
    return ok({
      accepted: true,
      position: session.cursor,
      total: this.notes.length,
      completed: session.cursor >= this.notes.length,
    });
  }

  missingCells(reviewerId: string): number {
    return this.notes.filter((note) => !this.ratings.has(`${note.id}:${reviewerId}`)).length;
  }
}

function ok(payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status: 200,
    headers: { 'Content-Type': 'application/json' },
  });
}

function error(status: number, code: string, message: string): Response {
  return new Response(JSON.stringify({ detail: { code, message } }), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

export function sampleNotes(count: number): FakeNote[] {
  return Array.from({ length: count }, (_, i) => ({
    id: `note-${i.toString(16).padStart(4, '0')}`,
    text: `Complaint ${i}.\n\nHistory ${i} of the visit.\n\nPlan ${i} for care.`,
  }));
}
