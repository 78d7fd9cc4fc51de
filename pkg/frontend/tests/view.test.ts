// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from 'vitest';

import { ReviewApi } from '../src/api.js';
import { ReviewController } from '../src/controller.js';
import { mount } from '../src/view.js';
import { CRITERIA } from '../src/types.js';
import { FakeService, sampleNotes } from './fake_service.js';

function submitButton(root: HTMLElement): HTMLButtonElement {
  const button = root.querySelector<HTMLButtonElement>('#submit');
  if (!button) {
    throw new Error('submit button not rendered');
  }
  return button;
}

function clickVerdict(root: HTMLElement, criterion: string, verdict: string): void {
  const button = root.querySelector<HTMLButtonElement>(
    `button[data-criterion="${criterion}"][data-verdict="${verdict}"]`,
  );
  if (!button) {
    throw new Error(`no verdict button for ${criterion}/${verdict}`);
  }
  button.click();
}

describe('review card view', () => {
  let root: HTMLElement;
  let service: FakeService;
  let controller: ReviewController;

  beforeEach(async () => {
    document.body.innerHTML = '<main id="app"></main>';
    root = document.getElementById('app') as HTMLElement;
    service = new FakeService(sampleNotes(3));
    controller = new ReviewController(new ReviewApi('http://fake.test', service.fetch));
    mount(root, controller);
    await controller.start('alice', 3);
  });

  it('shows exactly one note with progress', () => {
    expect(root.querySelectorAll('.note-text').length).toBe(1);
    expect(root.querySelector('.progress')?.textContent).toBe('1 / 3');
  });

  it('renders criterion help for all four criteria', () => {
    const rows = root.querySelectorAll('.criterion-row');
    expect(rows.length).toBe(4);
    for (const criterion of CRITERIA) {
      expect(root.querySelector(`.criterion-row[data-criterion="${criterion}"] details`)).toBeTruthy();
    }
  });

  it('disables submit until all four verdicts are chosen', () => {
    expect(submitButton(root).disabled).toBe(true);
    clickVerdict(root, 'age', 'TRUE');
    clickVerdict(root, 'gender', 'FALSE');
    clickVerdict(root, 'body_part', 'TRUE');
    expect(submitButton(root).disabled).toBe(true);
    clickVerdict(root, 'coherence', 'TRUE');
    expect(submitButton(root).disabled).toBe(false);
  });

  it('marks the chosen verdict as selected', () => {
    clickVerdict(root, 'age', 'FALSE');
    const chosen = root.querySelector('button[data-criterion="age"][data-verdict="FALSE"]');
    expect(chosen?.getAttribute('aria-pressed')).toBe('true');
    const other = root.querySelector('button[data-criterion="age"][data-verdict="TRUE"]');
    expect(other?.getAttribute('aria-pressed')).toBe('false');
  });

  it('renders markup-looking note text literally', async () => {
    service.notes[service.sessions.size >= 0 ? 0 : 0]!.text = '';
    const hostile = new FakeService([
      { id: 'n1', text: 'BP < 120 and <script>alert(1)</script> stays text' },
    ]);
    const hostileController = new ReviewController(
      new ReviewApi('http://fake.test', hostile.fetch),
    );
    document.body.innerHTML = '<main id="other"></main>';
    const other = document.getElementById('other') as HTMLElement;
    mount(other, hostileController);
    await hostileController.start('bob', 1);
    const note = other.querySelector('.note-text') as HTMLElement;
    expect(note.textContent).toContain('<script>alert(1)</script>');
    expect(other.querySelector('.note-text script')).toBeNull();
  });

  it('advances to the next card after submit', async () => {
    for (const criterion of CRITERIA) {
      clickVerdict(root, criterion, 'TRUE');
    }
    await controller.submit();
    expect(root.querySelector('.progress')?.textContent).toBe('2 / 3');
    expect(submitButton(root).disabled).toBe(true);
  });

  it('shows the completion screen with no controls', async () => {
    for (let i = 0; i < 3; i += 1) {
      for (const criterion of CRITERIA) {
        clickVerdict(root, criterion, 'TRUE');
      }
      await controller.submit();
    }
    expect(root.querySelector('.complete')).toBeTruthy();
    expect(root.querySelector('#submit')).toBeNull();
    expect(root.querySelector('.verdict')).toBeNull();
  });

  it('shows a dismissible banner on failure and keeps selections', async () => {
    for (const criterion of CRITERIA) {
      clickVerdict(root, criterion, 'TRUE');
    }
    service.failNextRequests = 1;
    await controller.submit();
    expect(root.querySelector('.banner')).toBeTruthy();
    const selected = root.querySelectorAll('.verdict.selected');
    expect(selected.length).toBe(4);
  });
});
