// Browser entry point: wires the controller to the DOM via one delegated
// listener per event type. Configuration is limited to the API base URL
// (window.EXPENSEFLOW_API, default same-origin).

import { ApiClient } from './api.js';
import { Controller } from './controller.js';

declare global {
  interface Window {
    EXPENSEFLOW_API?: string;
  }
}

function boot() {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app element');
  const api = new ApiClient(window.EXPENSEFLOW_API ?? '');
  const controller = new Controller(api, (html) => {
    root.innerHTML = html;
  });

  root.addEventListener('click', (event) => {
    const target = (event.target as HTMLElement).closest<HTMLElement>('[data-action]');
    if (!target) return;
    const action = target.dataset.action;
    if (action === 'open-task') {
      event.preventDefault();
      void controller.openTask(target.dataset.task ?? '');
    } else if (action === 'submit-approve') {
      void controller.submitApprove();
    } else if (action === 'submit-reject') {
      const comment = prompt('Rejection comment (optional)') ?? undefined;
      void controller.submitReject(comment);
    } else if (action === 'cancel' || action === 'back-to-inbox' || action === 'nav-inbox') {
      event.preventDefault();
      void controller.showInbox();
    } else if (action === 'nav-metrics' || action === 'refresh-metrics') {
      event.preventDefault();
      void controller.showMetrics();
    } else if (action === 'retry') {
      void controller.refreshInbox();
    }
  });

  root.addEventListener('change', (event) => {
    const target = event.target as HTMLElement;
    if (target.matches('select[data-role="category"]')) {
      const select = target as HTMLSelectElement;
      controller.chooseCategory(select.dataset.item ?? '', select.value);
    } else if (target.matches('input[data-role="save-synonyms"]')) {
      controller.toggleSaveSynonyms((target as HTMLInputElement).checked);
    }
  });

  void controller.start();
}

document.addEventListener('DOMContentLoaded', boot);
