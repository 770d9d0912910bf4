"""Controller state: a window of recent (query, display) pairs, the running
intent distribution over the session prefix, and the cumulative cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import AggFunc, Cmp, OpType, Query, StepRecord, VECTOR_WIDTH
from ..errors import UnknownColumn
from ..intent import BitermTopicModel, tokenize
from ..sampling import stable_hash64
from ..tabular import ColumnStats, Table

QUERY_ENC_WIDTH = 6
WINDOW = 3

_CMP_ORDER = [Cmp.EQ, Cmp.NEQ, Cmp.GT, Cmp.LT, Cmp.CONTAINS]
_AGG_ORDER = [AggFunc.COUNT, AggFunc.SUM, AggFunc.AVG]
_OP_ORDER = [OpType.BACK, OpType.FILTER, OpType.GROUP]


class QueryEncoder:
    """Queries as 6 reals in [0, 1]: op, attr, comparator, term, group attr,
    aggregate. Numeric terms map to their equal-width decile over the parent
    column; categorical terms hash to a stable unit float."""

    def __init__(self, table: Table, stats: dict[str, ColumnStats]):
        self.columns = table.column_names
        self.n_cols = len(self.columns)
        self.stats = stats
        self.types = {c.name: c.ctype for c in table.columns}

    def _col_slot(self, name: str | None) -> float:
        if name is None:
            return 0.0
        if name not in self.columns:
            raise UnknownColumn(f"cannot encode unknown column {name!r}")
        return (self.columns.index(name) + 1) / self.n_cols

    def _term_slot(self, attr: str, term) -> float:
        if self.types[attr].is_numeric:
            st = self.stats[attr]
            lo = st.min if st.min is not None else 0.0
            span = st.value_range or 1.0
            decile = int(np.clip((float(term) - lo) / span * 10, 0, 9))
            return (decile + 1) / 10.0
        return stable_hash64(str(term)) / 2.0**64

    def encode(self, query: Query) -> np.ndarray:
        out = np.zeros(QUERY_ENC_WIDTH)
        out[0] = (_OP_ORDER.index(query.op_type) + 1) / len(_OP_ORDER)
        if query.op_type is OpType.FILTER:
            out[1] = self._col_slot(query.attr)
            out[2] = (_CMP_ORDER.index(query.cmp) + 1) / len(_CMP_ORDER)
            out[3] = self._term_slot(query.attr, query.term)
        elif query.op_type is OpType.GROUP:
            out[4] = self._col_slot(query.group_attr)
            out[5] = (_AGG_ORDER.index(query.agg_func) + 1) / len(_AGG_ORDER)
        return out


@dataclass(frozen=True)
class AgentState:
    window: np.ndarray        # (WINDOW, 6 + V), most recent first, zero padded
    intent_probs: np.ndarray  # (K,)
    cumulative_cost: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.window.ravel(), self.intent_probs,
                               [self.cumulative_cost]])


def state_width(n_topics: int, vector_width: int = VECTOR_WIDTH) -> int:
    return WINDOW * (QUERY_ENC_WIDTH + vector_width) + n_topics + 1


class StateEncoder:
    def __init__(self, table: Table, stats: dict[str, ColumnStats],
                 intent_model: BitermTopicModel, vector_width: int = VECTOR_WIDTH):
        self.query_encoder = QueryEncoder(table, stats)
        self.intent_model = intent_model
        self.vector_width = vector_width

    @property
    def width(self) -> int:
        return state_width(self.intent_model.n_topics, self.vector_width)

    def encode(self, history: list[StepRecord]) -> AgentState:
        window = np.zeros((WINDOW, QUERY_ENC_WIDTH + self.vector_width))
        for slot, rec in enumerate(reversed(history[-WINDOW:])):
            window[slot, :QUERY_ENC_WIDTH] = self.query_encoder.encode(rec.query)
            window[slot, QUERY_ENC_WIDTH:] = rec.display.vector
        if history:
            probs = self.intent_model.transform([tokenize([r.query for r in history])])[0]
        else:
            probs = np.asarray(self.intent_model.topic_prior_)
        cost = float(sum(r.cost_ratio for r in history))
        return AgentState(window=window, intent_probs=probs, cumulative_cost=cost)

    def encode_flat(self, history: list[StepRecord]) -> np.ndarray:
        return self.encode(history).flat()
