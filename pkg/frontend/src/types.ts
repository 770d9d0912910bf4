// Wire types mirroring the session-service payloads.

export interface ColumnInfo {
  name: string;
  type: "integer" | "real" | "categorical";
}

export interface DatasetInfo {
  name: string;
  row_count: number;
  columns: ColumnInfo[];
  config_hash: string;
  checkpoint_id: string;
  policies: string[];
}

export interface CatalogEntry {
  sample_id: string;
  row_count: number;
  effective_sr: number;
  strategy: string;
  strat_columns: string[];
}

export interface QueryPayload {
  op: "filter" | "group" | "back";
  attr?: string;
  cmp?: "eq" | "neq" | "gt" | "lt" | "contains";
  term?: string | number;
  agg?: "count" | "sum" | "avg";
  agg_attr?: string | null;
}

export interface DisplayPayload {
  kind: "filtered_view" | "grouped_bars";
  matched_rows: number;
  group_count: number;
  group_attr: string | null;
  agg_func: string | null;
  groups: [string, number][];
  estimates: [string, number][];
  top_rows: string[][];
  vector: number[];
}

export interface StepPayload {
  step: number;
  query: QueryPayload;
  sample_id: string;
  effective_sr: number;
  rows_scanned: number;
  rows_scanned_full: number;
  cost_ratio: number;
  latency_saved_cum: number;
  intent_probs: number[];
  display: DisplayPayload;
  mirror: DisplayPayload | null;
  diverged: boolean | null;
}

export interface SessionReport {
  session_id: string;
  dataset: string;
  policy: string;
  mirror: boolean;
  steps: StepPayload[];
  latency_reduction: number;
  intent_trace: number[][];
  config_hash: string;
  checkpoint_id: string;
}

export interface CreateSessionResponse {
  session_id: string;
  config_hash: string;
  checkpoint_id: string;
}
