/**
 * DOM rendering for the review card.
 *
 * The note body is always inserted with `textContent`, so anything that
 * looks like markup in a generated note is displayed literally, never
 * interpreted.
 */

import type { ReviewController } from './controller.js';
import {
  CRITERIA,
  CRITERION_HELP,
  CRITERION_LABELS,
  type CriterionKey,
  type Verdict,
} from './types.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function verdictButton(
  controller: ReviewController,
  criterion: CriterionKey,
  verdict: Verdict,
  label: string,
  selected: boolean,
): HTMLButtonElement {
  const button = el('button', selected ? 'verdict selected' : 'verdict');
  button.type = 'button';
  button.textContent = label;
  button.dataset.criterion = criterion;
  button.dataset.verdict = verdict;
  button.setAttribute('aria-pressed', selected ? 'true' : 'false');
  button.addEventListener('click', () => {
    controller.setVerdict(criterion, verdict);
  });
  return button;
}

export function render(root: HTMLElement, controller: ReviewController): void {
  const state = controller.getState();
  root.textContent = '';

  if (state.phase === 'idle') {
    return;
  }

  if (state.phase === 'error') {
    const box = el('div', 'fatal');
    box.appendChild(el('h2', undefined, 'Review unavailable'));
    box.appendChild(el('p', undefined, state.fatal ?? 'Unknown error.'));
    root.appendChild(box);
    return;
  }

  if (state.phase === 'complete') {
    const done = el('div', 'complete');
    done.appendChild(el('h2', undefined, 'Session complete'));
    done.appendChild(
      el('p', undefined, `All ${state.total} notes reviewed. Thank you.`),
    );
    root.appendChild(done);
    return;
  }

  if (state.phase === 'loading' || state.card === null) {
    root.appendChild(el('p', 'loading', 'Loading…'));
    return;
  }

  const card = state.card;
  const container = el('div', 'card');

  const progress = el('p', 'progress', `${card.position} / ${card.total}`);
  container.appendChild(progress);

  const note = el('pre', 'note-text');
  note.textContent = card.text;
  container.appendChild(note);

  if (state.banner !== null) {
    const banner = el('div', 'banner');
    banner.setAttribute('role', 'alert');
    banner.textContent = state.banner;
    const retry = el('button', 'retry', 'Retry');
    retry.type = 'button';
    retry.addEventListener('click', () => {
      void controller.retry();
    });
    banner.appendChild(retry);
    container.appendChild(banner);
  }

  const form = el('div', 'criteria');
  for (const criterion of CRITERIA) {
    const row = el('div', 'criterion-row');
    row.dataset.criterion = criterion;

    const heading = el('div', 'criterion-name', CRITERION_LABELS[criterion]);
    row.appendChild(heading);

    const help = el('details', 'criterion-help');
    help.appendChild(el('summary', undefined, 'What counts?'));
    help.appendChild(el('p', undefined, CRITERION_HELP[criterion]));
    row.appendChild(help);

    const selected = card.verdicts[criterion];
    const buttons = el('div', 'verdict-buttons');
    buttons.appendChild(
      verdictButton(controller, criterion, 'TRUE', 'Consistent', selected === 'TRUE'),
    );
    buttons.appendChild(
      verdictButton(controller, criterion, 'FALSE', 'Inconsistent', selected === 'FALSE'),
    );
    row.appendChild(buttons);
    form.appendChild(row);
  }
  container.appendChild(form);

  const submit = el('button', 'submit', 'Submit ratings');
  submit.type = 'button';
  submit.id = 'submit';
  submit.disabled = !controller.canSubmit();
  submit.addEventListener('click', () => {
    void controller.submit();
  });
  container.appendChild(submit);

  root.appendChild(container);
}

/** Wire a controller to a root element: re-render on every state change. */
export function mount(root: HTMLElement, controller: ReviewController): void {
  controller.subscribe(() => render(root, controller));
  render(root, controller);
}
