/** Browser entry point: start form, then the review loop. */

import { ReviewApi } from './api.js';
import { ReviewController } from './controller.js';
import { mount } from './view.js';

function defaultApiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get('api') ?? 'http://127.0.0.1:8000';
}

function startForm(root: HTMLElement, onStart: (reviewer: string, seed: number) => void): void {
  const form = document.createElement('form');
  form.className = 'start-form';

  const reviewerLabel = document.createElement('label');
  reviewerLabel.textContent = 'Reviewer id ';
  const reviewer = document.createElement('input');
  reviewer.name = 'reviewer';
  reviewer.required = true;
  reviewer.placeholder = 'e.g. alice';
  reviewerLabel.appendChild(reviewer);

  const seedLabel = document.createElement('label');
  seedLabel.textContent = 'Seed ';
  const seed = document.createElement('input');
  seed.name = 'seed';
  seed.type = 'number';
  seed.value = String(Math.floor(Math.random() * 1_000_000));
  seedLabel.appendChild(seed);

  const begin = document.createElement('button');
  begin.type = 'submit';
  begin.textContent = 'Begin review';

  form.appendChild(reviewerLabel);
  form.appendChild(seedLabel);
  form.appendChild(begin);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    if (reviewer.value.trim()) {
      onStart(reviewer.value.trim(), Number(seed.value) || 0);
    }
  });
  root.appendChild(form);
}

function boot(): void {
  const root = document.getElementById('app');
  if (!(root instanceof HTMLElement)) {
    throw new Error('missing #app element');
  }
  const api = new ReviewApi(defaultApiBase());
  const controller = new ReviewController(api);
  startForm(root, (reviewer, seed) => {
    root.textContent = '';
    mount(root, controller);
    void controller.start(reviewer, seed);
  });
}

boot();
