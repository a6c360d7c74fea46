// View controller: polling, form state, and decision submission with a
// double-submit guard. Rendering goes through an injected sink so the whole
// flow is testable without a browser.

import { ApiClient, ApiError } from './api.js';
import {
  approveBody,
  buildResult,
  buildTaskForm,
  canSubmit,
  inboxRows,
  metricsRows,
  missingCategories,
  rejectBody,
  type FormInput,
  type TaskFormModel,
} from './viewmodel.js';
import {
  renderBanner,
  renderChrome,
  renderInbox,
  renderMetrics,
  renderNotice,
  renderResult,
  renderTaskForm,
} from './render.js';
import type { TaskDetail } from './types.js';

export const POLL_INTERVAL_MS = 3000;

export type View = 'inbox' | 'task' | 'result' | 'metrics';

export interface ControllerOptions {
  reviewer?: string;
  labelsPath?: string;
  setIntervalImpl?: typeof setInterval;
  clearIntervalImpl?: typeof clearInterval;
}

export class Controller {
  view: View = 'inbox';
  html = '';
  notice = '';
  submitting = false;
  private form: TaskFormModel | null = null;
  private detail: TaskDetail | null = null;
  private input: FormInput;
  private validation: string[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  private readonly setIntervalImpl: typeof setInterval;
  private readonly clearIntervalImpl: typeof clearInterval;

  constructor(
    private api: ApiClient,
    private sink: (html: string) => void = () => {},
    private options: ControllerOptions = {},
  ) {
    this.input = { categories: {}, saveSynonyms: true, reviewer: options.reviewer ?? 'reviewer' };
    this.setIntervalImpl = options.setIntervalImpl ?? setInterval;
    this.clearIntervalImpl = options.clearIntervalImpl ?? clearInterval;
  }

  private show(content: string) {
    this.html = renderChrome(content, this.notice);
    this.sink(this.html);
  }

  async start(): Promise<void> {
    await this.showInbox();
    this.timer = this.setIntervalImpl(() => {
      if (this.view === 'inbox') void this.refreshInbox();
    }, POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.timer !== null) this.clearIntervalImpl(this.timer);
    this.timer = null;
  }

  async showInbox(keepNotice = false): Promise<void> {
    this.view = 'inbox';
    if (!keepNotice) this.notice = '';
    await this.refreshInbox();
  }

  async refreshInbox(): Promise<void> {
    try {
      const tasks = await this.api.listPendingTasks();
      this.show(renderInbox(inboxRows(tasks)));
    } catch (err) {
      // the inbox keeps its last data; the banner offers retry
      this.show(renderBanner(`API unreachable: ${(err as Error).message}`));
    }
  }

  async openTask(taskId: string): Promise<void> {
    try {
      const detail = await this.api.taskDetail(taskId);
      this.detail = detail;
      this.form = buildTaskForm(detail);
      this.input = {
        categories: {},
        saveSynonyms: true,
        reviewer: this.options.reviewer ?? 'reviewer',
      };
      // preselect the advisor's suggestion where it gave one
      for (const item of this.form.items) {
        if (item.needsCategory && item.suggestedCategory) {
          this.input.categories[item.name] = item.suggestedCategory;
        }
      }
      this.validation = [];
      this.view = 'task';
      this.notice = '';
      this.renderForm();
    } catch (err) {
      this.show(renderBanner(`Cannot load task ${taskId}: ${(err as Error).message}`));
    }
  }

  private renderForm() {
    if (!this.form) return;
    this.show(
      renderTaskForm(this.form, this.input, canSubmit(this.form, this.input), this.validation),
    );
  }

  chooseCategory(itemName: string, category: string): void {
    this.input.categories[itemName] = category;
    this.validation = this.validation.filter((name) => name !== itemName);
    this.renderForm();
  }

  toggleSaveSynonyms(on: boolean): void {
    this.input.saveSynonyms = on;
    this.renderForm();
  }

  /** Approve path; returns true when a decision reached the server. */
  async submitApprove(): Promise<boolean> {
    if (!this.form || this.submitting) return false; // double-click guard
    const missing = missingCategories(this.form, this.input);
    if (missing.length > 0) {
      this.validation = missing;
      this.renderForm(); // inline validation, no request sent
      return false;
    }
    return this.send(approveBody(this.form, this.input));
  }

  async submitReject(comment?: string): Promise<boolean> {
    if (!this.form || this.submitting) return false;
    return this.send(rejectBody(this.input.reviewer, comment));
  }

  private async send(body: ReturnType<typeof approveBody>): Promise<boolean> {
    if (!this.form) return false;
    this.submitting = true;
    try {
      const response = await this.api.submitDecision(this.form.taskId, body);
      this.view = 'result';
      this.notice = '';
      this.show(renderResult(buildResult(response, this.detail?.account ?? null)));
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // decided elsewhere (or a replay): show the note and refresh
        this.notice = renderNotice('Task was already decided; refreshing the inbox.');
        await this.showInbox(true);
        return false;
      }
      if (err instanceof ApiError && err.status === 422) {
        this.notice = renderNotice(`Validation failed: ${err.message}`);
        this.renderForm();
        return false;
      }
      this.show(renderBanner(`Decision failed: ${(err as Error).message}`));
      return false;
    } finally {
      this.submitting = false;
    }
  }

  async showMetrics(): Promise<void> {
    this.view = 'metrics';
    try {
      const payload = await this.api.metrics(this.options.labelsPath);
      this.notice = '';
      this.show(renderMetrics(metricsRows(payload)));
    } catch (err) {
      this.show(renderBanner(`Metrics unavailable: ${(err as Error).message}`));
    }
  }
}
