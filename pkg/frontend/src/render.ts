// HTML string renderers for each view. Pure string-in, string-out so the
// test suite can assert on markup without a browser.

import type { InboxRow, ItemFormRow, MetricRow, ResultModel, TaskFormModel } from './viewmodel.js';

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function renderBanner(message: string, retry = true): string {
  return (
    `<div class="banner error" data-role="error-banner">${escapeHtml(message)}` +
    (retry ? ' <button data-action="retry">Retry</button>' : '') +
    `</div>`
  );
}

export function renderNotice(message: string): string {
  return `<div class="banner notice" data-role="notice">${escapeHtml(message)}</div>`;
}

export function renderInbox(rows: InboxRow[]): string {
  if (rows.length === 0) {
    return `<section class="inbox"><h2>Pending review tasks</h2>
      <p data-role="empty-state">No pending tasks.</p></section>`;
  }
  const body = rows
    .map(
      (row) => `<tr data-task="${escapeHtml(row.taskId)}">
        <td><a href="#" data-action="open-task" data-task="${escapeHtml(row.taskId)}">${escapeHtml(row.taskId)}</a></td>
        <td>${escapeHtml(row.reportId)}</td>
        <td>${escapeHtml(row.createdAt)}</td>
        <td>${row.itemCount}</td>
      </tr>`,
    )
    .join('');
  return `<section class="inbox"><h2>Pending review tasks</h2>
    <table class="list"><thead><tr><th>Task</th><th>Report</th><th>Created</th><th>Items</th></tr></thead>
    <tbody>${body}</tbody></table></section>`;
}

function categorySelect(item: ItemFormRow, choices: string[], chosen: string | undefined): string {
  const options = ['<option value="">choose…</option>']
    .concat(
      choices.map((c) => {
        const selected = c === (chosen ?? item.suggestedCategory ?? '') ? ' selected' : '';
        return `<option value="${escapeHtml(c)}"${selected}>${escapeHtml(c)}</option>`;
      }),
    )
    .join('');
  return `<select data-role="category" data-item="${escapeHtml(item.name)}">${options}</select>`;
}

export function renderTaskForm(
  form: TaskFormModel,
  input: { categories: Record<string, string>; saveSynonyms: boolean },
  submitEnabled: boolean,
  validation: string[] = [],
): string {
  const fields = form.receiptFields
    .map(
      (f) =>
        `<tr><td>${escapeHtml(f.name)}</td><td>${escapeHtml(String(f.value))}</td><td>${f.confidence}</td></tr>`,
    )
    .join('');
  const items = form.items
    .map((item) => {
      const badge = item.compliant ? `<span class="badge ${item.compliant}">${item.compliant}</span>` : '';
      const missing = validation.includes(item.name)
        ? `<p class="field-error" data-role="field-error">Choose a category for ${escapeHtml(item.name)}.</p>`
        : '';
      return `<div class="item-card" data-item="${escapeHtml(item.name)}">
        <div class="row"><label>New item name</label>
          <input type="text" value="${escapeHtml(item.name)}" readonly disabled data-role="item-name"></div>
        <div class="row"><label>Pseudoword</label>
          <input type="text" value="${escapeHtml(item.pseudoword ?? '')}" readonly disabled data-role="pseudoword"></div>
        <div class="row"><label>Category</label>
          ${item.needsCategory ? categorySelect(item, form.categoryChoices, input.categories[item.name]) : escapeHtml(item.suggestedCategory ?? '-')}</div>
        <p class="rationale">${badge} ${escapeHtml(item.rationale)}</p>
        ${missing}
      </div>`;
    })
    .join('');
  return `<section class="task-form" data-task="${escapeHtml(form.taskId)}">
    <h2>Task ${escapeHtml(form.taskId)} — report ${escapeHtml(form.reportId)}</h2>
    <p>${escapeHtml(form.description)} (account ${escapeHtml(form.accountCode)})</p>
    <h3>Receipt</h3>
    <table class="list"><thead><tr><th>Field</th><th>Value</th><th>Confidence</th></tr></thead>
    <tbody>${fields}</tbody></table>
    <h3>Recommended items</h3>
    <p class="hint">New product name and similar words cannot be modified.</p>
    ${items}
    <label class="row"><input type="checkbox" data-role="save-synonyms"${input.saveSynonyms ? ' checked' : ''}>
      Save similar words</label>
    <div class="actions">
      <button data-action="submit-approve"${submitEnabled ? '' : ' disabled'}>Submit</button>
      <button data-action="submit-reject">Reject</button>
      <button data-action="cancel">Cancel</button>
    </div>
  </section>`;
}

export function renderResult(result: ResultModel): string {
  const rows = result.rows
    .map(
      (r) =>
        `<tr><td>${escapeHtml(r.name)}</td><td>${escapeHtml(r.category)}</td><td>${escapeHtml(r.result)}</td></tr>`,
    )
    .join('');
  return `<section class="result">
    <h2>Processing result</h2>
    <table class="list"><thead><tr><th>Product Name</th><th>Category</th><th>Result</th></tr></thead>
    <tbody>${rows}</tbody></table>
    <p>${escapeHtml(result.accountSentence)}</p>
    <p class="final-banner ${result.approved ? 'ok' : 'bad'}" data-role="final-banner">
      <strong>${escapeHtml(result.banner)}</strong></p>
    <button data-action="back-to-inbox">Confirm</button>
  </section>`;
}

export function renderMetrics(rows: MetricRow[]): string {
  const body = rows
    .map((r) => `<tr><td>${escapeHtml(r.label)}</td><td>${escapeHtml(r.display)}</td></tr>`)
    .join('');
  return `<section class="metrics"><h2>Evaluation metrics</h2>
    <table class="list"><tbody>${body}</tbody></table>
    <button data-action="refresh-metrics">Refresh</button></section>`;
}

export function renderChrome(content: string, notice = ''): string {
  return `<header class="top">
      <span class="logo">expenseflow review</span>
      <nav>
        <a href="#" data-action="nav-inbox">Inbox</a>
        <a href="#" data-action="nav-metrics">Metrics</a>
      </nav>
    </header>
    ${notice}
    <main>${content}</main>`;
}
