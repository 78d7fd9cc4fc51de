import { beforeEach, describe, expect, it } from 'vitest';

import { ReviewApi } from '../src/api.js';
import { ReviewController } from '../src/controller.js';
import { CRITERIA } from '../src/types.js';
import { FakeService, sampleNotes } from './fake_service.js';

function makeController(service: FakeService): ReviewController {
  return new ReviewController(new ReviewApi('http://fake.test', service.fetch));
}

function setAll(controller: ReviewController, verdict: 'TRUE' | 'FALSE' = 'TRUE'): void {
  for (const criterion of CRITERIA) {
    controller.setVerdict(criterion, verdict);
  }
}

describe('ReviewController', () => {
  let service: FakeService;

  beforeEach(() => {
    service = new FakeService(sampleNotes(5));
  });

  it('starts a session and shows the first card', async () => {
    const controller = makeController(service);
    await controller.start('alice', 7);
    const state = controller.getState();
    expect(state.phase).toBe('reviewing');
    expect(state.card?.position).toBe(1);
    expect(state.card?.total).toBe(5);
    expect(state.card?.verdicts).toEqual({});
  });

  it('cannot submit until every criterion is set', async () => {
    const controller = makeController(service);
    await controller.start('alice', 7);
    expect(controller.canSubmit()).toBe(false);
    controller.setVerdict('age', 'TRUE');
    controller.setVerdict('gender', 'TRUE');
    controller.setVerdict('body_part', 'FALSE');
    expect(controller.canSubmit()).toBe(false);
    await controller.submit(); // gated: no request leaves the client
    expect(service.ratings.size).toBe(0);
    controller.setVerdict('coherence', 'TRUE');
    expect(controller.canSubmit()).toBe(true);
  });

  it('submits, auto-advances, and completes the session', async () => {
    const controller = makeController(service);
    await controller.start('alice', 7);
    for (let i = 0; i < 5; i += 1) {
      expect(controller.getState().phase).toBe('reviewing');
      setAll(controller, i % 2 === 0 ? 'TRUE' : 'FALSE');
      await controller.submit();
    }
    expect(controller.getState().phase).toBe('complete');
    expect(service.missingCells('alice')).toBe(0);
  });

  it('keeps entered verdicts when the network fails, then retries', async () => {
    const controller = makeController(service);
    await controller.start('alice', 7);
    setAll(controller);
    service.failNextRequests = 1;
    await controller.submit();
    const state = controller.getState();
    expect(state.phase).toBe('reviewing');
    expect(state.banner).toMatch(/Retry/i);
    expect(state.card?.verdicts.age).toBe('TRUE');
    await controller.retry();
    expect(controller.getState().card?.position).toBe(2);
    expect(controller.getState().banner).toBeNull();
  });

  it('shows a banner and preserves state on a service rejection', async () => {
    const controller = makeController(service);
    await controller.start('alice', 7);
    setAll(controller);
    // Force a duplicate by rating the current note behind the client's back.
    const session = [...service.sessions.values()][0]!;
    const currentId = service.notes[session.order[0]!]!.id;
    session.rated.add(currentId);
    await controller.submit();
    const state = controller.getState();
    expect(state.phase).toBe('reviewing');
    expect(state.banner).toContain('duplicate_submission');
    expect(state.card?.noteId).toBe(currentId);
    expect(state.card?.verdicts.coherence).toBe('TRUE');
  });

  it('resumes at the service cursor after a refresh', async () => {
    const first = makeController(service);
    await first.start('alice', 7);
    setAll(first);
    await first.submit();
    expect(first.getState().card?.position).toBe(2);

    // A fresh controller (new page load) resumes the same session.
    const second = makeController(service);
    await second.start('alice', 7);
    const state = second.getState();
    expect(state.phase).toBe('reviewing');
    expect(state.card?.position).toBe(2);
    expect(state.completedCount).toBe(1);
  });

  it('marks the session complete when resuming a finished one', async () => {
    const controller = makeController(service);
    await controller.start('alice', 7);
    for (let i = 0; i < 5; i += 1) {
      setAll(controller);
      await controller.submit();
    }
    const resumed = makeController(service);
    await resumed.start('alice', 7);
    expect(resumed.getState().phase).toBe('complete');
  });

  it('reports fatal errors distinctly', async () => {
    const controller = makeController(service);
    service.failNextRequests = 1;
    await controller.start('alice', 7);
    expect(controller.getState().phase).toBe('error');
    expect(controller.getState().fatal).toBeTruthy();
  });

  it('notifies subscribers on every transition', async () => {
    const controller = makeController(service);
    const phases: string[] = [];
    controller.subscribe((state) => phases.push(state.phase));
    await controller.start('alice', 7);
    expect(phases[0]).toBe('loading');
    expect(phases[phases.length - 1]).toBe('reviewing');
  });
});
