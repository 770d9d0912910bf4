import type { QueryPayload, SessionReport, StepPayload } from "./types.js";

// The provenance panel is an exact, ordered projection of the session
// report: every value below is a service-payload field verbatim. The UI
// never recomputes result numbers; bar heights are the only presentation
// scaling and live in the chart module.

export interface ProvenanceRow {
  step: number;
  query: string;
  sample_id: string;
  effective_sr: number;
  rows_scanned: number;
  rows_scanned_full: number;
  cost_ratio: number;
  latency_saved_cum: number;
  intent_probs: number[];
  diverged: boolean | null;
}

export interface ViewModel {
  sessionId: string;
  dataset: string;
  policy: string;
  mirror: boolean;
  configHash: string;
  checkpointId: string;
  latencyReduction: number;
  steps: StepPayload[];
  provenance: ProvenanceRow[];
  depth: number;
}

export function describeQuery(query: QueryPayload): string {
  if (query.op === "filter") {
    return `FILTER ${query.attr} ${query.cmp} ${String(query.term)}`;
  }
  if (query.op === "group") {
    const agg = query.agg_attr ? `${query.agg}(${query.agg_attr})` : `${query.agg}`;
    return `GROUP ${query.attr} · ${agg}`;
  }
  return "BACK";
}

/** Stack depth after replaying the steps; BACK is illegal at depth 1. */
export function stackDepth(steps: { query: QueryPayload }[]): number {
  let depth = 1;
  for (const step of steps) {
    depth += step.query.op === "back" ? -1 : 1;
  }
  return depth;
}

export function projectReport(report: SessionReport): ViewModel {
  return {
    sessionId: report.session_id,
    dataset: report.dataset,
    policy: report.policy,
    mirror: report.mirror,
    configHash: report.config_hash,
    checkpointId: report.checkpoint_id,
    latencyReduction: report.latency_reduction,
    steps: report.steps,
    provenance: report.steps.map((step) => ({
      step: step.step,
      query: describeQuery(step.query),
      sample_id: step.sample_id,
      effective_sr: step.effective_sr,
      rows_scanned: step.rows_scanned,
      rows_scanned_full: step.rows_scanned_full,
      cost_ratio: step.cost_ratio,
      latency_saved_cum: step.latency_saved_cum,
      intent_probs: step.intent_probs,
      diverged: step.diverged,
    })),
    depth: stackDepth(report.steps),
  };
}
