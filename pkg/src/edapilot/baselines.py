"""Per-query sample selectors used as comparison methods.

BlinkDb-style: match the query column set against the stratification
columns of the catalog's stratified samples; no overlap falls back to the
1% uniform sample. CiGreedy: pick the sample whose mean-estimate confidence
interval (normal approximation with finite population correction) is
tightest for the requested aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.stats import norm

from .catalog import SampleCatalog
from .engine import AggFunc, OpType, Query, StepRecord
from .errors import MissingSample
from .tabular import ColumnStats

UNIFORM_FALLBACK_ID = "Uni@1%"


@dataclass(frozen=True)
class BlinkDb:
    fallback_id: str = UNIFORM_FALLBACK_ID


@dataclass(frozen=True)
class CiGreedy:
    confidence: float = 0.95


@dataclass(frozen=True)
class Fixed:
    sample_id: str


BaselinePolicy = BlinkDb | CiGreedy | Fixed


def active_filter_attrs(history: list[StepRecord]) -> set[str]:
    """Filter columns of the frames still on the stack."""
    stack: list[str | None] = []
    for rec in history:
        if rec.query.op_type is OpType.FILTER:
            stack.append(rec.query.attr)
        elif rec.query.op_type is OpType.GROUP:
            stack.append(None)
        elif stack:
            stack.pop()
    return {attr for attr in stack if attr is not None}


def query_column_set(query: Query, history: list[StepRecord]) -> set[str]:
    qcs = active_filter_attrs(history)
    if query.op_type is OpType.FILTER:
        qcs.add(query.attr)
    elif query.op_type is OpType.GROUP:
        qcs.add(query.group_attr)
    return qcs


def _jaccard(a: set[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 0.0
    return len(a & b) / len(a | b)


def ci_half_width(stddev: float, n: int, population: int, confidence: float) -> float:
    """Normal-interval half width for a sample mean with finite population
    correction: z * s / sqrt(n) * sqrt(1 - n/N)."""
    if n <= 0:
        return float("inf")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    fpc = max(0.0, 1.0 - n / population) if population > 0 else 1.0
    return z * stddev / (n**0.5) * (fpc**0.5)


def baseline_select(
    policy: BaselinePolicy,
    query: Query,
    history: list[StepRecord],
    catalog: SampleCatalog,
    stats: dict[str, ColumnStats],
) -> str:
    if isinstance(policy, Fixed):
        return catalog.by_id(policy.sample_id).sample_id

    if isinstance(policy, BlinkDb):
        qcs = query_column_set(query, history)
        best_id, best_key = None, None
        for handle in catalog.handles:
            if not handle.strat_columns_used:
                continue
            overlap = _jaccard(qcs, handle.strat_columns_used)
            if overlap <= 0:
                continue
            key = (overlap, handle.effective_sr)
            if best_key is None or key > best_key:
                best_id, best_key = handle.sample_id, key
        if best_id is not None:
            return best_id
        return catalog.by_id(policy.fallback_id).sample_id

    if isinstance(policy, CiGreedy):
        aggregate = (
            query.op_type is OpType.GROUP
            and query.agg_func in (AggFunc.AVG, AggFunc.SUM)
        )
        if not aggregate:
            return max(catalog.handles, key=lambda h: h.effective_sr).sample_id
        s = stats[query.agg_attr].stddev or 0.0
        population = catalog.parent.row_count
        best = min(
            catalog.handles,
            key=lambda h: ci_half_width(s, h.row_count, population, policy.confidence),
        )
        return best.sample_id

    raise MissingSample(f"unknown baseline policy {policy!r}")
