// Pure view-model builders. The UI holds no authoritative state: everything
// here derives from API payloads plus the reviewer's in-progress form input.

import type {
  DecisionBody,
  DecisionResponse,
  MetricsPayload,
  TaskDetail,
  TaskSummary,
} from './types.js';

export interface InboxRow {
  taskId: string;
  reportId: string;
  createdAt: string;
  itemCount: number;
}

export function inboxRows(tasks: TaskSummary[]): InboxRow[] {
  return tasks.map((t) => ({
    taskId: t.task_id,
    reportId: t.report_id,
    createdAt: t.created_at,
    itemCount: t.item_count,
  }));
}

export interface ItemFormRow {
  // the new item name and its pseudoword are facts of the receipt and the
  // recommendation; the reviewer can never edit them
  name: string;
  nameEditable: false;
  pseudoword: string | null;
  pseudowordEditable: false;
  needsCategory: boolean;
  suggestedCategory: string | null;
  rationale: string;
  compliant: 'yes' | 'no' | 'unsure' | null;
  similarity: number | null;
}

export interface TaskFormModel {
  taskId: string;
  reportId: string;
  description: string;
  accountCode: string;
  accountName: string | null;
  categoryChoices: string[];
  receiptFields: { name: string; value: string | number; confidence: number }[];
  items: ItemFormRow[];
}

export function buildTaskForm(detail: TaskDetail): TaskFormModel {
  return {
    taskId: detail.task_id,
    reportId: detail.report_id,
    description: detail.report.description,
    accountCode: detail.report.account_code,
    accountName: detail.account?.name ?? null,
    categoryChoices: detail.account?.allowed_categories ?? [],
    receiptFields: (detail.extraction?.fields ?? []).map((f) => ({
      name: f.field_name,
      value: f.value,
      confidence: f.confidence,
    })),
    items: detail.items.map((ti) => ({
      name: ti.item.name,
      nameEditable: false,
      pseudoword: ti.recommendation?.matched_similar ?? null,
      pseudowordEditable: false,
      needsCategory: ti.verdict.status === 'Unknown',
      suggestedCategory: ti.recommendation?.recommended_category ?? null,
      rationale: ti.recommendation?.rationale ?? '',
      compliant: ti.recommendation?.compliant ?? null,
      similarity: ti.recommendation?.similarity ?? null,
    })),
  };
}

export interface FormInput {
  categories: Record<string, string>; // item name -> chosen category
  saveSynonyms: boolean;
  reviewer: string;
  comment?: string;
}

// Submit stays disabled until every item that needs a category has one.
export function missingCategories(form: TaskFormModel, input: FormInput): string[] {
  return form.items
    .filter((item) => item.needsCategory && !(input.categories[item.name] ?? '').trim())
    .map((item) => item.name);
}

export function canSubmit(form: TaskFormModel, input: FormInput): boolean {
  return missingCategories(form, input).length === 0;
}

export function approveBody(form: TaskFormModel, input: FormInput): DecisionBody {
  const resolutions = form.items
    .filter((item) => item.needsCategory)
    .map((item) => {
      const synonyms = input.saveSynonyms && item.pseudoword ? [item.pseudoword] : [];
      return {
        original_name: item.name,
        category: input.categories[item.name],
        save_synonyms: synonyms.length > 0,
        synonyms,
      };
    });
  return {
    action: 'approve',
    reviewer: input.reviewer,
    comment: input.comment,
    item_resolutions: resolutions,
  };
}

export function rejectBody(reviewer: string, comment?: string): DecisionBody {
  return { action: 'reject', reviewer, comment, item_resolutions: [] };
}

export interface ResultModel {
  rows: { name: string; category: string; result: string }[];
  accountSentence: string;
  banner: string;
  approved: boolean;
}

export function buildResult(
  response: DecisionResponse,
  account: { code: string; name: string | null; allowed_categories: string[] } | null,
): ResultModel {
  const approved = response.verdict === 'Approve';
  const accountSentence = account
    ? `Allowable categories for ${account.name ?? account.code} (${account.code}) ` +
      `accounts are ${account.allowed_categories.join(', ') || 'none'}.`
    : '';
  return {
    rows: response.final.item_results.map((r) => ({
      name: r.name,
      category: r.category ?? '-',
      result:
        r.result === 'approved' ? 'Approval' : r.result === 'rejected' ? 'Rejection' : 'Unreviewed',
    })),
    accountSentence,
    banner: `The final result is ${approved ? 'approval' : 'rejection'}.`,
    approved,
  };
}

export interface MetricRow {
  label: string;
  display: string;
}

export function metricsRows(payload: MetricsPayload): MetricRow[] {
  const rows: MetricRow[] = [
    { label: 'TP', display: String(payload.matrix.tp) },
    { label: 'TN', display: String(payload.matrix.tn) },
    { label: 'FP', display: String(payload.matrix.fp) },
    { label: 'FN', display: String(payload.matrix.fn) },
  ];
  for (const name of ['accuracy', 'precision', 'recall', 'f1'] as const) {
    const value = payload[name];
    rows.push({
      label: name,
      display: value === null ? 'n/a (zero denominator)' : (value as number).toFixed(2),
    });
  }
  return rows;
}
