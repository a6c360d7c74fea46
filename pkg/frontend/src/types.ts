// Payload shapes of the /api/v1 JSON contract.

export interface TaskSummary {
  task_id: string;
  report_id: string;
  created_at: string;
  state: 'Pending' | 'Decided';
  item_count: number;
}

export interface LineItem {
  name: string;
  quantity: number | null;
  unit_price: number | null;
  amount: number;
}

export interface ItemVerdict {
  item: LineItem;
  status: 'Allowed' | 'Prohibited' | 'Unknown';
  basis: string;
  category: string | null;
}

export interface Recommendation {
  item_name: string;
  compliant: 'yes' | 'no' | 'unsure';
  rationale: string;
  recommended_category: string | null;
  recommended_account: string | null;
  matched_similar: string | null;
  similarity: number | null;
}

export interface TaskItem {
  item: LineItem;
  verdict: ItemVerdict;
  recommendation: Recommendation | null;
}

export interface ExtractionField {
  field_name: string;
  value: string | number;
  confidence: number;
}

export interface TaskDetail {
  task_id: string;
  report_id: string;
  created_at: string;
  state: 'Pending' | 'Decided';
  items: TaskItem[];
  report: {
    report_id: string;
    user: string;
    account_code: string;
    description: string;
    declared_total: number;
    state: string;
  };
  extraction: { fields: ExtractionField[]; items: LineItem[]; warnings: string[] } | null;
  account: { code: string; name: string; allowed_categories: string[] } | null;
}

export interface ItemResolutionBody {
  original_name: string;
  category: string;
  save_synonyms: boolean;
  synonyms: string[];
}

export interface DecisionBody {
  action: 'approve' | 'reject';
  reviewer: string;
  comment?: string;
  item_resolutions: ItemResolutionBody[];
}

export interface ItemResult {
  name: string;
  category: string | null;
  result: 'approved' | 'rejected' | 'unreviewed';
}

export interface DecisionResponse {
  task_id: string;
  report_id: string;
  final_state: string;
  verdict: 'Approve' | 'Reject';
  final: {
    report_id: string;
    verdict: 'Approve' | 'Reject';
    reasons: string[];
    decided_by: { kind: string; name: string | null };
    item_results: ItemResult[];
    reason_class: string | null;
  };
}

export interface MetricsPayload {
  matrix: { tp: number; tn: number; fp: number; fn: number };
  accuracy: number | null;
  precision: number | null;
  recall: number | null;
  f1: number | null;
  [reason: string]: unknown;
}

export interface ApiFailure {
  code: string;
  message: string;
  status: number;
}
