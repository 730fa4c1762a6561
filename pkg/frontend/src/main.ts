// DOM glue: wires the input form, the render loop, and the 2 s stats poll.

import { ApiClient } from './api.js';
import { FeedbackConsole } from './state.js';
import { renderSession } from './render.js';

function baseUrlFromLocation(): string {
  const param = new URLSearchParams(window.location.search).get('api');
  if (param) return param;
  return window.location.origin;
}

function mount(): void {
  const root = document.getElementById('session')!;
  const form = document.getElementById('ask-form') as HTMLFormElement;
  const input = document.getElementById('question') as HTMLInputElement;
  const baseInput = document.getElementById('base-url') as HTMLInputElement;

  let app: FeedbackConsole;
  let stopPolling: (() => void) | null = null;
  let lastQuestion = '';

  const start = (baseUrl: string) => {
    if (stopPolling) stopPolling();
    const client = new ApiClient(baseUrl);
    app = new FeedbackConsole(client, (session) => {
      root.innerHTML = renderSession(session);
    });
    stopPolling = app.startPolling(2000);
  };

  const initial = baseUrlFromLocation();
  baseInput.value = initial;
  start(initial);

  baseInput.addEventListener('change', () => start(baseInput.value.trim()));

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    lastQuestion = input.value;
    void app.ask(input.value).then((entry) => {
      if (entry) input.value = '';
    });
  });

  root.addEventListener('click', (event) => {
    const target = (event.target as HTMLElement).closest('[data-action]');
    if (!target) return;
    const action = target.getAttribute('data-action');
    const qid = target.getAttribute('data-qid') ?? '';
    if (action === 'up' || action === 'down') {
      void app.submitFeedback(qid, action === 'up');
    } else if (action === 'toggle-docs') {
      app.toggleDocuments(qid);
    } else if (action === 'dismiss-toast') {
      app.dismissToast();
    } else if (action === 'retry') {
      void app.ask(lastQuestion);
    }
  });
}

document.addEventListener('DOMContentLoaded', mount);
