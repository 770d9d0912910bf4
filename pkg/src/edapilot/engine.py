"""FILTER / GROUP / BACK execution over the full table or a sample view.

Sessions hold a stack of frames. A frame's row set is the logical one: the
filter-predicate chain applied to the full table. Every step scans only
frame rows contained in the step's chosen sample, so results approximate
the frame through that sample alone; switching samples between steps never
compounds one sample's selection into the next step's scan. Cost ratios
are rows scanned on the chosen source over the frame's full row count.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .catalog import FULL_SOURCE_ID, SampleHandle
from .errors import EmptyStack, TypeMismatch, UnknownColumn
from .sampling import stable_hash64
from .tabular import Column, ColumnStats, ColumnType, NULL_LABEL, Table, render_value

VECTOR_WIDTH = 32
TOP_K_ROWS = 5
MAX_DISPLAY_GROUPS = 20
NUMERIC_GROUP_BINS = 10


class OpType(Enum):
    FILTER = "filter"
    GROUP = "group"
    BACK = "back"


class Cmp(Enum):
    EQ = "eq"
    NEQ = "neq"
    GT = "gt"
    LT = "lt"
    CONTAINS = "contains"


class AggFunc(Enum):
    COUNT = "count"
    SUM = "sum"
    AVG = "avg"


@dataclass(frozen=True)
class Query:
    op_type: OpType
    attr: str | None = None
    cmp: Cmp | None = None
    term: object = None
    group_attr: str | None = None
    agg_func: AggFunc | None = None
    agg_attr: str | None = None

    @staticmethod
    def filter(attr: str, cmp: Cmp, term) -> "Query":
        return Query(OpType.FILTER, attr=attr, cmp=cmp, term=term)

    @staticmethod
    def group(group_attr: str, agg_func: AggFunc, agg_attr: str | None = None) -> "Query":
        return Query(OpType.GROUP, group_attr=group_attr, agg_func=agg_func, agg_attr=agg_attr)

    @staticmethod
    def back() -> "Query":
        return Query(OpType.BACK)

    def to_dict(self) -> dict:
        if self.op_type is OpType.FILTER:
            return {"op": "filter", "attr": self.attr, "cmp": self.cmp.value, "term": self.term}
        if self.op_type is OpType.GROUP:
            return {
                "op": "group",
                "attr": self.group_attr,
                "agg": self.agg_func.value,
                "agg_attr": self.agg_attr,
            }
        return {"op": "back"}

    @staticmethod
    def from_dict(payload: dict) -> "Query":
        op = payload["op"]
        if op == "filter":
            return Query.filter(payload["attr"], Cmp(payload["cmp"]), payload["term"])
        if op == "group":
            return Query.group(payload["attr"], AggFunc(payload["agg"]), payload.get("agg_attr"))
        if op == "back":
            return Query.back()
        raise ValueError(f"unknown op {op!r}")


class DisplayKind(Enum):
    FILTERED_VIEW = "filtered_view"
    GROUPED_BARS = "grouped_bars"


@dataclass(frozen=True)
class DisplayResult:
    kind: DisplayKind
    matched_rows: int
    group_count: int
    groups: tuple[tuple[str, float], ...]      # raw aggregates, sorted desc then key
    estimates: tuple[tuple[str, float], ...]   # scaled count/sum estimates, same order
    top_rows: tuple[tuple[str, ...], ...]      # rendered rows for display
    insight_rows: tuple[tuple[str, ...], ...]  # identity tuples for recall matching
    vector: np.ndarray
    rows_scanned: int
    agg_func: AggFunc | None = None
    group_attr: str | None = None


def _key_hash_unit(key: str) -> float:
    return stable_hash64(key) / 2.0**64


def encode_display(
    kind: DisplayKind,
    matched_rows: int,
    group_count: int,
    groups: tuple[tuple[str, float], ...],
    agg_func: AggFunc | None,
    width: int = VECTOR_WIDTH,
) -> np.ndarray:
    vec = np.zeros(width)
    vec[0] = 1.0 if kind is DisplayKind.FILTERED_VIEW else 0.0
    vec[1] = 1.0 if kind is DisplayKind.GROUPED_BARS else 0.0
    vec[2] = math.log1p(matched_rows if kind is DisplayKind.FILTERED_VIEW else group_count)
    bars = [v for _, v in groups[:8]]
    if bars:
        peak = max(abs(v) for v in bars)
        if peak > 0:
            for i, v in enumerate(bars):
                vec[3 + i] = v / peak
    for i, (key, _) in enumerate(groups[:8]):
        vec[11 + i] = _key_hash_unit(key)
    if agg_func is not None:
        vec[19 + list(AggFunc).index(agg_func)] = 1.0
    return vec


@dataclass
class Frame:
    rows: np.ndarray  # the predicate chain applied to the full table
    display: DisplayResult | None


@dataclass
class StepRecord:
    query: Query
    sample_id: str
    display: DisplayResult
    rows_scanned: int
    rows_scanned_full: int
    cost_ratio: float
    fallback: bool = False
    mirror_display: DisplayResult | None = None
    wall_ms: float = 0.0  # measured, informational only; rewards use row counts


@dataclass
class SessionState:
    table: Table
    stats: dict[str, ColumnStats]
    frames: list[Frame] = field(default_factory=list)
    cumulative_cost: float = 0.0
    history: list[StepRecord] = field(default_factory=list)

    @staticmethod
    def start(table: Table, stats: dict[str, ColumnStats] | None = None) -> "SessionState":
        from .tabular import compute_stats

        all_rows = np.arange(table.row_count, dtype=np.int64)
        return SessionState(
            table=table,
            stats=stats if stats is not None else compute_stats(table),
            frames=[Frame(rows=all_rows, display=None)],
        )

    @property
    def depth(self) -> int:
        return len(self.frames)

    @property
    def current(self) -> Frame:
        return self.frames[-1]


def source_rows(source: Table | SampleHandle) -> tuple[str, np.ndarray | None, float]:
    """(sample_id, row indices or None for all, effective SR)."""
    if isinstance(source, SampleHandle):
        return source.sample_id, source.row_indices, source.effective_sr
    return FULL_SOURCE_ID, None, 1.0


def numeric_bin_edges(stats: ColumnStats) -> np.ndarray:
    lo = stats.min if stats.min is not None else 0.0
    hi = stats.max if stats.max is not None else 1.0
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, NUMERIC_GROUP_BINS + 1)


def numeric_bucket_label(edges: np.ndarray, bucket: int) -> str:
    return f"[{edges[bucket]:g},{edges[bucket + 1]:g})"


def _group_codes(col: Column, stats: ColumnStats, rows: np.ndarray):
    """(codes over the given rows with -1 for null, label per code).

    Group keys are bin edges from the parent table's stats for numeric
    columns (shared between sample and full-data executions) and the column
    categories otherwise.
    """
    if col.ctype is ColumnType.CATEGORICAL:
        codes, uniq = col.category_codes()
        return codes[rows], uniq
    edges = numeric_bin_edges(stats)
    vals = col.values[rows]
    buckets = np.clip(np.searchsorted(edges, vals, side="right") - 1, 0, NUMERIC_GROUP_BINS - 1)
    codes = np.where(np.isnan(vals), -1, buckets).astype(np.int64)
    labels = np.array([numeric_bucket_label(edges, b) for b in range(NUMERIC_GROUP_BINS)])
    return codes, labels


def _filter_mask(col: Column, cmp: Cmp, term) -> np.ndarray:
    """Boolean match mask over the given column values; nulls never match."""
    if col.ctype is ColumnType.CATEGORICAL:
        codes, uniq = col.category_codes()
        term_s = str(term)
        if cmp in (Cmp.EQ, Cmp.NEQ):
            pos = np.searchsorted(uniq, term_s)
            known = pos < len(uniq) and uniq[pos] == term_s
            if cmp is Cmp.EQ:
                return codes == pos if known else np.zeros(len(codes), dtype=bool)
            return (codes != pos) & (codes >= 0) if known else codes >= 0
        if cmp is Cmp.CONTAINS:
            lut = np.array([term_s in cat for cat in uniq], dtype=bool)
            mask = np.zeros(len(codes), dtype=bool)
            valid = codes >= 0
            mask[valid] = lut[codes[valid]]
            return mask
        raise TypeMismatch(f"{cmp.value} not defined on categorical column {col.name!r}")
    present = ~np.isnan(col.values)
    if cmp is Cmp.CONTAINS:
        term_s = str(term)
        rendered = [render_value(col, v) if ok else "" for v, ok in zip(col.values, present)]
        return present & np.array([term_s in r for r in rendered], dtype=bool)
    term_f = float(term)
    if cmp is Cmp.EQ:
        return present & (np.nan_to_num(col.values, nan=np.inf) == term_f)
    if cmp is Cmp.NEQ:
        return present & (np.nan_to_num(col.values, nan=term_f) != term_f)
    if cmp is Cmp.GT:
        return present & (np.nan_to_num(col.values, nan=-np.inf) > term_f)
    if cmp is Cmp.LT:
        return present & (np.nan_to_num(col.values, nan=np.inf) < term_f)
    raise AssertionError(cmp)


def _format_agg(value: float) -> str:
    return f"{value:.6g}"


def _run_filter(table: Table, stats, rows: np.ndarray, query: Query):
    col = table.column(query.attr)
    mask = _filter_mask(col, query.cmp, query.term)
    matched = rows[mask[rows]]
    top = tuple(table.render_row(int(r)) for r in matched[:TOP_K_ROWS])
    insight = tuple(("row",) + t for t in top)
    return matched, top, insight


def _run_group(table: Table, stats, rows: np.ndarray, query: Query, effective_sr: float):
    gcol = table.column(query.group_attr)
    codes, labels = _group_codes(gcol, stats[query.group_attr], rows)
    agg = query.agg_func
    if agg is not AggFunc.COUNT:
        acol = table.column(query.agg_attr)
        if not acol.ctype.is_numeric:
            raise TypeMismatch(f"{agg.value} needs a numeric column, got {query.agg_attr!r}")
        weights = acol.values[rows]
        ok = ~np.isnan(weights)
        codes, weights = codes[ok], weights[ok]

    shifted = codes + 1  # slot 0 is the null group
    width = len(labels) + 1
    counts = np.bincount(shifted, minlength=width).astype(float)
    if agg is AggFunc.COUNT:
        raw = counts
        estimates = counts / effective_sr
    elif agg is AggFunc.SUM:
        raw = np.bincount(shifted, weights=weights, minlength=width).astype(float)
        estimates = raw / effective_sr
    else:  # AVG: unbiased as-is; scaled companion is the count estimate
        sums = np.bincount(shifted, weights=weights, minlength=width).astype(float)
        raw = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        estimates = counts / effective_sr
    present = np.flatnonzero(counts > 0)
    names = {i: (NULL_LABEL if i == 0 else str(labels[i - 1])) for i in present}
    order = sorted(present, key=lambda i: (-raw[i], names[i]))
    groups = tuple((names[i], float(raw[i])) for i in order[:MAX_DISPLAY_GROUPS])
    ests = tuple((names[i], float(estimates[i])) for i in order[:MAX_DISPLAY_GROUPS])
    top = tuple((k, _format_agg(v)) for k, v in groups[:TOP_K_ROWS])
    ctx = (query.group_attr, agg.value, query.agg_attr or NULL_LABEL)
    insight = tuple(("group",) + ctx + (k,) for k, _ in groups[:TOP_K_ROWS])
    return len(present), groups, ests, top, insight


def _evaluate(table: Table, stats, rows: np.ndarray, query: Query, effective_sr: float,
              rows_scanned: int) -> tuple[DisplayResult, np.ndarray | None]:
    """Run one query over the given row set; returns (display, narrowed rows or None)."""
    if query.op_type is OpType.FILTER:
        matched, top, insight = _run_filter(table, stats, rows, query)
        display = DisplayResult(
            kind=DisplayKind.FILTERED_VIEW,
            matched_rows=len(matched),
            group_count=0,
            groups=(),
            estimates=(),
            top_rows=top,
            insight_rows=insight,
            vector=encode_display(DisplayKind.FILTERED_VIEW, len(matched), 0, (), None),
            rows_scanned=rows_scanned,
        )
        return display, matched
    n_groups, groups, ests, top, insight = _run_group(table, stats, rows, query, effective_sr)
    display = DisplayResult(
        kind=DisplayKind.GROUPED_BARS,
        matched_rows=int(len(rows)),
        group_count=n_groups,
        groups=groups,
        estimates=ests,
        top_rows=top,
        insight_rows=insight,
        vector=encode_display(DisplayKind.GROUPED_BARS, int(len(rows)), n_groups, groups,
                              query.agg_func),
        rows_scanned=rows_scanned,
        agg_func=query.agg_func,
        group_attr=query.group_attr,
    )
    return display, None


def _root_view(table: Table, rows: np.ndarray) -> DisplayResult:
    """The un-queried view shown when BACK lands on the root frame."""
    top = tuple(table.render_row(int(r)) for r in rows[:TOP_K_ROWS])
    return DisplayResult(
        kind=DisplayKind.FILTERED_VIEW,
        matched_rows=int(len(rows)),
        group_count=0,
        groups=(),
        estimates=(),
        top_rows=top,
        insight_rows=tuple(("row",) + t for t in top),
        vector=encode_display(DisplayKind.FILTERED_VIEW, int(len(rows)), 0, (), None),
        rows_scanned=0,
    )


def _validate_query(table: Table, query: Query) -> None:
    if query.op_type is OpType.FILTER:
        table.column(query.attr)
    elif query.op_type is OpType.GROUP:
        table.column(query.group_attr)
        if query.agg_func is not AggFunc.COUNT:
            if query.agg_attr is None:
                raise UnknownColumn(f"{query.agg_func.value} requires agg_attr")
            table.column(query.agg_attr)


def execute(
    state: SessionState,
    query: Query,
    source: Table | SampleHandle,
    mirror: bool = False,
) -> DisplayResult:
    """Execute one step, push/pop the frame stack, and record costs."""
    table, stats = state.table, state.stats
    _validate_query(table, query)
    sample_id, src_rows, effective_sr = source_rows(source)

    if query.op_type is OpType.BACK:
        if state.depth < 2:
            raise EmptyStack("BACK at root frame")
        state.frames.pop()
        prior = state.current.display
        if prior is None:
            prior = _root_view(table, state.current.rows)
        record = StepRecord(query, sample_id, prior, 0, 0, 0.0)
        state.history.append(record)
        return prior

    frame = state.current
    scan = frame.rows if src_rows is None else np.intersect1d(
        frame.rows, src_rows, assume_unique=True
    )
    rows_scanned = int(len(scan))
    rows_scanned_full = int(len(frame.rows))
    started = time.perf_counter()
    display, _ = _evaluate(table, stats, scan, query, effective_sr, rows_scanned)
    wall_ms = (time.perf_counter() - started) * 1000.0

    mirror_display = None
    if mirror:
        mirror_display, _ = _evaluate(
            table, stats, frame.rows, query, 1.0, rows_scanned_full
        )

    if query.op_type is OpType.FILTER:
        # the frame narrows logically: predicate applied to the full table chain
        _, chain_narrowed = _evaluate(table, stats, frame.rows, query, 1.0, 0)
        state.frames.append(Frame(rows=chain_narrowed, display=display))
    else:
        state.frames.append(Frame(rows=frame.rows, display=display))

    cost_ratio = step_cost(rows_scanned, rows_scanned_full)
    state.cumulative_cost += cost_ratio
    state.history.append(
        StepRecord(query, sample_id, display, rows_scanned, rows_scanned_full, cost_ratio,
                   mirror_display=mirror_display, wall_ms=wall_ms)
    )
    return display


def step_cost(rows_scanned: int, rows_scanned_full: int) -> float:
    """Cost ratio of a step: rows scanned on the source over rows a full-data
    scan of the same frame would touch."""
    if rows_scanned_full <= 0:
        return 0.0
    return rows_scanned / rows_scanned_full


# ---------------------------------------------------------------------------
# Session log (newline-delimited JSON, append-only)


def step_to_log_record(session_id: str, step: int, rec: StepRecord) -> dict:
    return {
        "session_id": session_id,
        "step": step,
        "query": rec.query.to_dict(),
        "sample_id": rec.sample_id,
        "rows_scanned": rec.rows_scanned,
        "rows_scanned_full": rec.rows_scanned_full,
        "cost_ratio": rec.cost_ratio,
        "fallback": rec.fallback,
        "display_vector": [float(x) for x in rec.display.vector],
        "top_rows": [list(t) for t in rec.display.top_rows],
    }


def append_session_log(path, session_id: str, records: list[StepRecord]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for i, rec in enumerate(records):
            fh.write(json.dumps(step_to_log_record(session_id, i, rec), sort_keys=True))
            fh.write("\n")
