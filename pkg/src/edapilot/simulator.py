"""Stochastic analyst surrogate.

Sessions come from hand-specified intent templates: each template is a list
of phases, each phase a weighted set of query schemas. Result-conditioned
schemas (drilling into the currently displayed top bar, or branching on bar
dominance) read the live display, which is how approximation error on a
sample can divert the rest of the session.

Two decoupled seeded streams drive each session: one for schema choice and
session length, one for result-conditioned decisions. Replaying the same
streams against full data always reproduces the same session.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from .catalog import SampleHandle
from .engine import (
    AggFunc,
    Cmp,
    DisplayKind,
    DisplayResult,
    Query,
    SessionState,
    StepRecord,
    execute,
)
from .errors import ConfigError
from .tabular import ColumnStats, ColumnType, NULL_LABEL, Table, compute_stats

DEFAULT_LENGTH_RANGE = (5, 9)


class SourcePolicy(Protocol):
    """Chooses, per query, the data source the engine will scan."""

    def choose(self, state: SessionState, query: Query, step: int) -> Table | SampleHandle: ...


class FullDataPolicy:
    def __init__(self, table: Table):
        self.table = table

    def choose(self, state, query, step):
        return self.table


class FixedSamplePolicy:
    def __init__(self, catalog, sample_id: str):
        self.handle = catalog.by_id(sample_id)
        self.sample_id = sample_id

    def choose(self, state, query, step):
        return self.handle


# ---------------------------------------------------------------------------
# Query schemas


@dataclass(frozen=True)
class QuerySchema:
    kind: str
    attr: str | None = None
    cmp: str | None = None
    agg: str | None = None
    agg_attr: str | None = None
    top_m: int = 5
    dominance: float = 1.5
    alt: "QuerySchema | None" = None

    @property
    def conditioned(self) -> bool:
        return self.kind in ("drill_top_bar", "drill_or_pivot")

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in ("attr", "cmp", "agg", "agg_attr"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        if self.kind == "filter_top_category":
            out["top_m"] = self.top_m
        if self.kind == "drill_or_pivot":
            out["dominance"] = self.dominance
            out["alt"] = self.alt.to_dict()
        return out

    @staticmethod
    def from_dict(payload: dict) -> "QuerySchema":
        payload = dict(payload)
        if "alt" in payload:
            payload["alt"] = QuerySchema.from_dict(payload["alt"])
        return QuerySchema(**payload)


def filter_above_mean(attr: str) -> QuerySchema:
    return QuerySchema("filter_above_mean", attr=attr)


def filter_below_mean(attr: str) -> QuerySchema:
    return QuerySchema("filter_below_mean", attr=attr)


def filter_top_category(attr: str, top_m: int = 5) -> QuerySchema:
    return QuerySchema("filter_top_category", attr=attr, top_m=top_m)


def group_by(attr: str, agg: AggFunc = AggFunc.COUNT, agg_attr: str | None = None) -> QuerySchema:
    return QuerySchema("group", attr=attr, agg=agg.value, agg_attr=agg_attr)


def drill_top_bar() -> QuerySchema:
    return QuerySchema("drill_top_bar")


def drill_or_pivot(dominance: float, alt: QuerySchema) -> QuerySchema:
    return QuerySchema("drill_or_pivot", dominance=dominance, alt=alt)


def back_step() -> QuerySchema:
    return QuerySchema("back")


@dataclass(frozen=True)
class IntentTemplate:
    intent_id: str
    phases: tuple[tuple[tuple[QuerySchema, float], ...], ...]
    length_range: tuple[int, int] = DEFAULT_LENGTH_RANGE

    def to_dict(self) -> dict:
        return {
            "intent_id": self.intent_id,
            "length_range": list(self.length_range),
            "phases": [
                [{"schema": s.to_dict(), "weight": w} for s, w in phase]
                for phase in self.phases
            ],
        }

    @staticmethod
    def from_dict(payload: dict) -> "IntentTemplate":
        phases = tuple(
            tuple((QuerySchema.from_dict(e["schema"]), e["weight"]) for e in phase)
            for phase in payload["phases"]
        )
        return IntentTemplate(
            intent_id=payload["intent_id"],
            phases=phases,
            length_range=tuple(payload["length_range"]),
        )


@dataclass(frozen=True)
class SimulatorConfig:
    templates: tuple[IntentTemplate, ...]
    intent_mixture: tuple[float, ...]
    drill_softmax_temp: float = 0.25
    seed: int = 0

    def validate(self) -> None:
        if len(self.templates) != len(self.intent_mixture):
            raise ConfigError("one mixture weight per template required")
        if abs(sum(self.intent_mixture) - 1.0) > 1e-9:
            raise ConfigError(f"intent mixture sums to {sum(self.intent_mixture)}, expected 1")
        if self.drill_softmax_temp <= 0:
            raise ConfigError("drill_softmax_temp must be positive")
        for template in self.templates:
            _validate_template(template)

    def to_dict(self) -> dict:
        return {
            "templates": [t.to_dict() for t in self.templates],
            "intent_mixture": list(self.intent_mixture),
            "drill_softmax_temp": self.drill_softmax_temp,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(payload: dict) -> "SimulatorConfig":
        return SimulatorConfig(
            templates=tuple(IntentTemplate.from_dict(t) for t in payload["templates"]),
            intent_mixture=tuple(payload["intent_mixture"]),
            drill_softmax_temp=payload["drill_softmax_temp"],
            seed=payload.get("seed", 0),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    @staticmethod
    def load(path: str | Path) -> "SimulatorConfig":
        return SimulatorConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _validate_template(template: IntentTemplate) -> None:
    lo, hi = template.length_range
    if not (1 <= lo <= hi):
        raise ConfigError(f"{template.intent_id}: bad length range {template.length_range}")
    for i, phase in enumerate(template.phases):
        if not phase:
            raise ConfigError(f"{template.intent_id}: phase {i} has no schemas")
        if any(w <= 0 for _, w in phase):
            raise ConfigError(f"{template.intent_id}: phase {i} has non-positive weights")
        has_conditioned = any(s.conditioned for s, _ in phase)
        if has_conditioned:
            grouped_before = any(
                all(s.kind == "group" for s, _ in earlier)
                for earlier in template.phases[:i]
            )
            if not grouped_before:
                raise ConfigError(
                    f"{template.intent_id}: phase {i} drills but no earlier all-group phase"
                )
            if not any(not s.conditioned for s, _ in phase):
                raise ConfigError(
                    f"{template.intent_id}: phase {i} needs an unconditioned fallback schema"
                )


# ---------------------------------------------------------------------------
# Schema resolution


def _softmax_pick(groups, temp: float, rng_drill: np.random.Generator) -> str:
    keys = [k for k, _ in groups if k != NULL_LABEL]
    vals = np.array([v for k, v in groups if k != NULL_LABEL], dtype=float)
    peak = np.abs(vals).max()
    if peak > 0:
        vals = vals / peak
    logits = vals / max(temp, 1e-9)
    logits -= logits.max()
    p = np.exp(logits)
    p /= p.sum()
    return keys[int(rng_drill.choice(len(keys), p=p))]


def _drillable(display: DisplayResult | None, table: Table) -> bool:
    return (
        display is not None
        and display.kind is DisplayKind.GROUPED_BARS
        and display.group_attr is not None
        and table.column(display.group_attr).ctype is ColumnType.CATEGORICAL
        and any(k != NULL_LABEL for k, _ in display.groups)
    )


def _top_categories(stats: ColumnStats, top_m: int) -> list[str]:
    freqs = sorted(stats.category_frequencies.items(), key=lambda kv: (-kv[1], kv[0]))
    return [k for k, _ in freqs[:top_m]]


def resolve_schema(
    schema: QuerySchema,
    table: Table,
    stats: dict[str, ColumnStats],
    last_display: DisplayResult | None,
    temp: float,
    rng_schema: np.random.Generator,
    rng_drill: np.random.Generator,
    depth: int,
) -> Query | None:
    """Turn a schema into a concrete query, or None when it cannot apply."""
    if schema.kind == "filter_above_mean":
        return Query.filter(schema.attr, Cmp.GT, round(stats[schema.attr].mean, 6))
    if schema.kind == "filter_below_mean":
        return Query.filter(schema.attr, Cmp.LT, round(stats[schema.attr].mean, 6))
    if schema.kind == "filter_top_category":
        cats = _top_categories(stats[schema.attr], schema.top_m)
        if not cats:
            return None
        return Query.filter(schema.attr, Cmp.EQ, cats[int(rng_schema.integers(len(cats)))])
    if schema.kind == "group":
        return Query.group(schema.attr, AggFunc(schema.agg), schema.agg_attr)
    if schema.kind == "back":
        return Query.back() if depth >= 2 else None
    if schema.kind == "drill_top_bar":
        if not _drillable(last_display, table):
            return None
        key = _softmax_pick(last_display.groups, temp, rng_drill)
        return Query.filter(last_display.group_attr, Cmp.EQ, key)
    if schema.kind == "drill_or_pivot":
        if not _drillable(last_display, table):
            return None
        bars = [(k, v) for k, v in last_display.groups if k != NULL_LABEL]
        top_val = bars[0][1]
        second = bars[1][1] if len(bars) > 1 else 0.0
        dominated = second <= 0 or (top_val / second) >= schema.dominance
        if dominated:
            return Query.filter(last_display.group_attr, Cmp.EQ, bars[0][0])
        return resolve_schema(
            schema.alt, table, stats, last_display, temp, rng_schema, rng_drill, depth
        )
    raise ConfigError(f"unknown schema kind {schema.kind!r}")


def next_query(
    config: SimulatorConfig,
    template: IntentTemplate,
    step: int,
    table: Table,
    stats: dict[str, ColumnStats],
    state: SessionState,
    rng_schema: np.random.Generator,
    rng_drill: np.random.Generator,
) -> tuple[Query, bool]:
    """Sample the next query for the session; True when the phase fell back to
    an unconditioned schema because the display could not support the pick."""
    phase = template.phases[min(step, len(template.phases) - 1)]
    weights = np.array([w for _, w in phase], dtype=float)
    weights /= weights.sum()
    schema = phase[int(rng_schema.choice(len(phase), p=weights))][0]
    last_display = state.history[-1].display if state.history else None

    query = resolve_schema(
        schema, table, stats, last_display, config.drill_softmax_temp,
        rng_schema, rng_drill, state.depth,
    )
    if query is not None:
        return query, False

    fallback_pool = [(s, w) for s, w in phase if not s.conditioned]
    for _ in range(8):
        if not fallback_pool:
            break
        w = np.array([wt for _, wt in fallback_pool], dtype=float)
        w /= w.sum()
        pick = fallback_pool[int(rng_drill.choice(len(fallback_pool), p=w))][0]
        query = resolve_schema(
            pick, table, stats, last_display, config.drill_softmax_temp,
            rng_schema, rng_drill, state.depth,
        )
        if query is not None:
            return query, True
    # last resort keeps the session alive on any schema mix
    return Query.group(table.column_names[0], AggFunc.COUNT), True


@dataclass
class SessionRecord:
    session_id: str
    template_id: str
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def queries(self) -> list[Query]:
        return [s.query for s in self.steps]

    @property
    def displays(self) -> list[DisplayResult]:
        return [s.display for s in self.steps]

    def query_signature(self) -> str:
        return json.dumps([s.query.to_dict() for s in self.steps], sort_keys=True)


def generate_session(
    config: SimulatorConfig,
    table: Table,
    stats: dict[str, ColumnStats],
    policy: SourcePolicy,
    seed: int,
    session_index: int,
    session_id: str | None = None,
    mirror: bool = False,
    on_step=None,
) -> SessionRecord:
    rng_schema = np.random.default_rng((seed, session_index, 0))
    rng_drill = np.random.default_rng((seed, session_index, 1))
    t_idx = int(rng_schema.choice(len(config.templates), p=np.array(config.intent_mixture)))
    template = config.templates[t_idx]
    lo, hi = template.length_range
    length = int(rng_schema.integers(lo, hi + 1))

    state = SessionState.start(table, stats)
    record = SessionRecord(
        session_id=session_id or f"s{seed}-{session_index}",
        template_id=template.intent_id,
    )
    for step in range(length):
        query, fallback = next_query(
            config, template, step, table, stats, state, rng_schema, rng_drill
        )
        source = policy.choose(state, query, step)
        execute(state, query, source, mirror=mirror)
        state.history[-1].fallback = fallback
        record.steps.append(state.history[-1])
        if on_step is not None:
            on_step(state, record.steps[-1])
    return record


def generate_sessions(
    config: SimulatorConfig,
    table: Table,
    policy: SourcePolicy,
    n: int,
    seed: int,
    stats: dict[str, ColumnStats] | None = None,
    mirror: bool = False,
) -> list[SessionRecord]:
    config.validate()
    stats = stats if stats is not None else compute_stats(table)
    return [
        generate_session(config, table, stats, policy, seed, i, mirror=mirror)
        for i in range(n)
    ]


def unique_session_count(sessions: list[SessionRecord]) -> int:
    return len({s.query_signature() for s in sessions})
