"""Evaluation metrics and the comparison runner.

Three metrics per method, all against a held-out reference set generated on
full data with the same session seeds: Euclidean distance between mean
intent distributions, insight recall of the final top-k rows per intent,
and per-session latency reduction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .catalog import SampleCatalog
from .errors import EmptyIntentSlice, EmptySet
from .intent import BitermTopicModel, tokenize
from .simulator import SessionRecord, SimulatorConfig, generate_sessions
from .tabular import ColumnStats, Table


@dataclass
class SessionSet:
    sessions: list[SessionRecord]
    phis: np.ndarray    # (n, K)
    labels: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.sessions)

    @property
    def mean_phi(self) -> np.ndarray:
        if len(self.sessions) == 0:
            raise EmptySet("session set is empty")
        return self.phis.mean(axis=0)


def build_session_set(sessions: list[SessionRecord],
                      intent_model: BitermTopicModel) -> SessionSet:
    if not sessions:
        raise EmptySet("session set is empty")
    docs = [tokenize(s.queries) for s in sessions]
    phis = intent_model.transform(docs)
    return SessionSet(sessions=sessions, phis=phis, labels=phis.argmax(axis=1))


def intent_divergence(set_a: SessionSet, set_b: SessionSet) -> float:
    return float(np.linalg.norm(set_a.mean_phi - set_b.mean_phi))


def final_insight_rows(session: SessionRecord, k: int | None = 5,
                       last: int = 2) -> frozenset:
    out = set()
    for step in session.steps[-last:]:
        rows = step.display.insight_rows
        out.update(rows if k is None else rows[:k])
    return frozenset(out)


def insight_recall(gen_set: SessionSet, orig_set: SessionSet, intent_id: int,
                   k: int | None = 5, last: int = 2) -> float:
    gen = [s for s, lab in zip(gen_set.sessions, gen_set.labels) if lab == intent_id]
    orig = [s for s, lab in zip(orig_set.sessions, orig_set.labels) if lab == intent_id]
    if not gen or not orig:
        raise EmptyIntentSlice(f"intent {intent_id}: gen={len(gen)} orig={len(orig)}")
    gen_rows: set = set()
    for s in gen:
        gen_rows |= final_insight_rows(s, k=k, last=last)
    orig_rows: set = set()
    for s in orig:
        orig_rows |= final_insight_rows(s, k=k, last=last)
    if not orig_rows:
        return 1.0
    return len(gen_rows & orig_rows) / len(orig_rows)


def session_latency_reduction(session: SessionRecord) -> float:
    scanned = sum(s.rows_scanned for s in session.steps)
    full = sum(s.rows_scanned_full for s in session.steps)
    if full <= 0:
        return 0.0
    return 1.0 - scanned / full


def latency_reduction(session_set: SessionSet) -> tuple[np.ndarray, dict[str, float]]:
    if len(session_set) == 0:
        raise EmptySet("session set is empty")
    values = np.array([session_latency_reduction(s) for s in session_set.sessions])
    summary = {
        "median": float(np.median(values)),
        "q1": float(np.quantile(values, 0.25)),
        "q3": float(np.quantile(values, 0.75)),
        "mean": float(values.mean()),
        "min": float(values.min()),
        "max": float(values.max()),
    }
    return values, summary


# ---------------------------------------------------------------------------
# Comparison runner


@dataclass
class MethodResult:
    name: str
    intent_divergence: float
    relative_ed: float
    latency: dict[str, float]
    latency_values: list[float]
    recall_per_intent: dict[int, float]
    mean_recall: float
    action_usage: dict[int, dict[str, int]]  # intent -> sample_id -> count

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "intent_divergence": self.intent_divergence,
            "relative_ed": self.relative_ed,
            "latency": self.latency,
            "latency_values": self.latency_values,
            "recall_per_intent": {str(k): v for k, v in self.recall_per_intent.items()},
            "mean_recall": self.mean_recall,
            "action_usage": {
                str(i): dict(sorted(usage.items())) for i, usage in self.action_usage.items()
            },
        }


@dataclass
class EvaluationReport:
    reference_size: int
    n_topics: int
    methods: list[MethodResult] = field(default_factory=list)

    def by_name(self, name: str) -> MethodResult:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "reference_size": self.reference_size,
            "n_topics": self.n_topics,
            "methods": [m.to_dict() for m in self.methods],
        }


def action_usage_by_intent(session_set: SessionSet) -> dict[int, dict[str, int]]:
    usage: dict[int, dict[str, int]] = {}
    for session, label in zip(session_set.sessions, session_set.labels):
        per = usage.setdefault(int(label), {})
        for step in session.steps:
            per[step.sample_id] = per.get(step.sample_id, 0) + 1
    return usage


def evaluate_method(
    name: str,
    policy,
    sim_config: SimulatorConfig,
    table: Table,
    stats: dict[str, ColumnStats],
    intent_model: BitermTopicModel,
    reference: SessionSet,
    n: int,
    seed: int,
    recall_k: int | None = 5,
) -> tuple[MethodResult, SessionSet]:
    sessions = generate_sessions(sim_config, table, policy, n=n, seed=seed, stats=stats)
    gen_set = build_session_set(sessions, intent_model)
    ed = intent_divergence(gen_set, reference)
    values, latency = latency_reduction(gen_set)
    recalls: dict[int, float] = {}
    for intent_id in range(intent_model.n_topics):
        try:
            recalls[intent_id] = insight_recall(gen_set, reference, intent_id, k=recall_k)
        except EmptyIntentSlice:
            continue
    mean_recall = float(np.mean(list(recalls.values()))) if recalls else 0.0
    result = MethodResult(
        name=name,
        intent_divergence=ed,
        relative_ed=0.0,
        latency=latency,
        latency_values=[float(v) for v in values],
        recall_per_intent=recalls,
        mean_recall=mean_recall,
        action_usage=action_usage_by_intent(gen_set),
    )
    return result, gen_set


def run_evaluation(
    methods: list[tuple[str, object]],
    sim_config: SimulatorConfig,
    table: Table,
    stats: dict[str, ColumnStats],
    catalog: SampleCatalog,
    intent_model: BitermTopicModel,
    n: int = 1000,
    seed: int = 999,
    reference: SessionSet | None = None,
    recall_k: int | None = 5,
    normalize_to: str | None = None,
) -> EvaluationReport:
    """Generate n sessions per method (shared session seeds) and score them
    against the held-out full-data reference built from the same seeds."""
    from .simulator import FullDataPolicy

    if reference is None:
        ref_sessions = generate_sessions(
            sim_config, table, FullDataPolicy(table), n=n, seed=seed, stats=stats
        )
        reference = build_session_set(ref_sessions, intent_model)
    report = EvaluationReport(reference_size=len(reference), n_topics=intent_model.n_topics)
    for name, policy in methods:
        result, _ = evaluate_method(
            name, policy, sim_config, table, stats, intent_model, reference,
            n=n, seed=seed, recall_k=recall_k,
        )
        report.methods.append(result)
    anchor = normalize_to or (report.methods[0].name if report.methods else None)
    if anchor is not None:
        base = report.by_name(anchor).intent_divergence
        for m in report.methods:
            m.relative_ed = m.intent_divergence / base if base > 0 else (
                0.0 if m.intent_divergence == 0 else float("inf")
            )
    return report


def write_report_json(report: EvaluationReport, out_dir: str | Path,
                      config_hash: str | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict()
    if config_hash is not None:
        payload["config_hash"] = config_hash
    path = out / "report.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def render_report_tables(payload: dict, out_dir: str | Path) -> str:
    """TSV tables plus box-plot data from a report.json payload; returns the
    main table for printing."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_topics = payload["n_topics"]
    methods = payload["methods"]
    lines = ["method\tintent_divergence\trelative_ed\tlatency_median\tlatency_q1\t"
             "latency_q3\tmean_recall\t" +
             "\t".join(f"recall_intent_{i}" for i in range(n_topics))]
    for m in methods:
        per_intent = "\t".join(
            f"{m['recall_per_intent'].get(str(i), float('nan')):.4f}"
            for i in range(n_topics)
        )
        lines.append(
            f"{m['name']}\t{m['intent_divergence']:.6f}\t{m['relative_ed']:.4f}\t"
            f"{m['latency']['median']:.4f}\t{m['latency']['q1']:.4f}\t"
            f"{m['latency']['q3']:.4f}\t{m['mean_recall']:.4f}\t{per_intent}"
        )
    table = "\n".join(lines) + "\n"
    (out / "report.tsv").write_text(table, encoding="utf-8")

    usage_lines = ["method\tintent\tsample_id\tcount"]
    for m in methods:
        for intent_id in sorted(m["action_usage"], key=int):
            for sample_id, count in sorted(m["action_usage"][intent_id].items()):
                usage_lines.append(f"{m['name']}\t{intent_id}\t{sample_id}\t{count}")
    (out / "action_usage.tsv").write_text("\n".join(usage_lines) + "\n", encoding="utf-8")

    plot = {
        "latency_boxplot": {m["name"]: m["latency_values"] for m in methods},
        "recall_per_intent": {m["name"]: m["recall_per_intent"] for m in methods},
        "relative_ed": {m["name"]: m["relative_ed"] for m in methods},
    }
    (out / "plot_data.json").write_text(
        json.dumps(plot, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return table
