"""Episode reward: latency, intent and termination components, each scaled
to [-0.5, 0.5] and combined as r_latency + beta * r_intent + gamma * r_term.

Session distance is alignment-based: step similarity is half the
query-field match fraction plus half the cosine of display vectors; the
session distance is the minimum edit cost (substituting a step costs
1 - similarity, inserting or deleting costs 0.5) under the normalization
2*cost / (0.5*(len_a + len_b) + cost), which stays in [0, 1], is 0 exactly
on identical sessions, 1 on sessions sharing nothing, and keeps the
triangle inequality where plain length-normalized alignment scores do not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import StepRecord
from ..errors import EmptyGroundSet, TooShort
from ..intent import BitermTopicModel, tokenize
from .state import QueryEncoder

SQRT2 = float(np.sqrt(2.0))


def latency_reward(cost_ratios: list[float]) -> tuple[float, float]:
    """(raw sum of per-step 1 - cost_ratio, value normalized by length)."""
    if not cost_ratios:
        raise TooShort("latency reward needs at least one step")
    raw = float(sum(1.0 - c for c in cost_ratios))
    return raw, raw / len(cost_ratios)


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)


def step_similarity_matrix(fields_a: np.ndarray, vecs_a: np.ndarray,
                           fields_b: np.ndarray, vecs_b: np.ndarray) -> np.ndarray:
    match = (fields_a[:, None, :] == fields_b[None, :, :]).mean(axis=2)
    cosine = _unit_rows(vecs_a) @ _unit_rows(vecs_b).T
    return 0.5 * match + 0.5 * np.clip(cosine, 0.0, 1.0)


GAP_COST = 0.5


def _edit_cost(sim: np.ndarray) -> float:
    """Minimum edit cost: substitution costs 1 - sim, indels cost GAP_COST."""
    la, lb = sim.shape
    dp = np.zeros((la + 1, lb + 1))
    dp[:, 0] = np.arange(la + 1) * GAP_COST
    dp[0, :] = np.arange(lb + 1) * GAP_COST
    for i in range(1, la + 1):
        for j in range(1, lb + 1):
            dp[i, j] = min(
                dp[i - 1, j - 1] + 1.0 - sim[i - 1, j - 1],
                dp[i - 1, j] + GAP_COST,
                dp[i, j - 1] + GAP_COST,
            )
    return float(dp[la, lb])


def _normalize_cost(cost, len_a, len_b):
    denom = GAP_COST * (len_a + len_b) + cost
    return np.where(denom > 0, 2.0 * cost / np.where(denom > 0, denom, 1.0), 0.0)


@dataclass
class SessionSignature:
    """Arrays the reward computation needs from one session."""

    fields: np.ndarray   # (l, 6) encoded query fields
    vectors: np.ndarray  # (l, V) display vectors
    tokens: list[str]
    insight_rows: list[frozenset]  # per step, identity tuples of the display

    @property
    def length(self) -> int:
        return len(self.tokens)

    def final_rows(self, last: int = 2, top_k: int | None = 5) -> frozenset:
        out = set()
        for rows in self.insight_rows[-last:]:
            picked = sorted(rows) if top_k is None else sorted(rows)[:top_k]
            out.update(picked)
        return frozenset(out)


def session_signature(steps: list[StepRecord], encoder: QueryEncoder) -> SessionSignature:
    queries = [s.query for s in steps]
    fields = np.stack([encoder.encode(q) for q in queries]) if steps else np.zeros((0, 6))
    vectors = np.stack([s.display.vector for s in steps]) if steps else np.zeros((0, 0))
    return SessionSignature(
        fields=fields,
        vectors=vectors,
        tokens=tokenize(queries),
        insight_rows=[frozenset(s.display.insight_rows) for s in steps],
    )


def eda_sim_distance(a: SessionSignature, b: SessionSignature) -> float:
    """Normalized alignment distance; symmetric, 0 on identical sessions,
    1 when no step pair shares anything."""
    if a.length == 0 or b.length == 0:
        raise TooShort("sessions must be non-empty")
    sim = step_similarity_matrix(a.fields, a.vectors, b.fields, b.vectors)
    return float(_normalize_cost(_edit_cost(sim), a.length, b.length))


@dataclass
class GroundPack:
    """Reference sessions in batch-ready padded form."""

    signatures: list[SessionSignature]
    phis: np.ndarray      # (G, K)
    labels: np.ndarray    # (G,) argmax intents
    fields_padded: np.ndarray  # (G, Lmax, 6)
    vectors_padded: np.ndarray  # (G, Lmax, V) unit rows
    lengths: np.ndarray   # (G,)

    @property
    def size(self) -> int:
        return len(self.signatures)


def build_ground_pack(sessions, encoder: QueryEncoder,
                      intent_model: BitermTopicModel) -> GroundPack:
    if not sessions:
        raise EmptyGroundSet("no reference sessions")
    signatures = [session_signature(s.steps, encoder) for s in sessions]
    phis = intent_model.transform([sig.tokens for sig in signatures])
    labels = phis.argmax(axis=1)
    lengths = np.array([sig.length for sig in signatures])
    lmax = int(lengths.max())
    width = signatures[0].vectors.shape[1]
    fields = np.full((len(signatures), lmax, 6), -1.0)
    vectors = np.zeros((len(signatures), lmax, width))
    for g, sig in enumerate(signatures):
        fields[g, : sig.length] = sig.fields
        vectors[g, : sig.length] = _unit_rows(sig.vectors)
    return GroundPack(
        signatures=signatures,
        phis=phis,
        labels=labels,
        fields_padded=fields,
        vectors_padded=vectors,
        lengths=lengths,
    )


def distances_to_ground(sig: SessionSignature, pack: GroundPack) -> np.ndarray:
    """eda_sim distance from one session to every reference session, computed
    with the edit DP batched over the reference axis."""
    lg = sig.length
    match = (pack.fields_padded[:, None, :, :] == sig.fields[None, :, None, :]).mean(axis=3)
    cosine = np.einsum("ld,gmd->glm", _unit_rows(sig.vectors), pack.vectors_padded)
    sim = 0.5 * match + 0.5 * np.clip(cosine, 0.0, 1.0)
    g, lmax = pack.size, int(pack.lengths.max())
    dp = np.zeros((g, lg + 1, lmax + 1))
    dp[:, :, 0] = np.arange(lg + 1)[None, :] * GAP_COST
    dp[:, 0, :] = np.arange(lmax + 1)[None, :] * GAP_COST
    for i in range(1, lg + 1):
        for j in range(1, lmax + 1):
            diag = dp[:, i - 1, j - 1] + 1.0 - sim[:, i - 1, j - 1]
            dp[:, i, j] = np.minimum(diag, np.minimum(dp[:, i - 1, j] + GAP_COST,
                                                      dp[:, i, j - 1] + GAP_COST))
    costs = dp[np.arange(g), lg, pack.lengths]
    return _normalize_cost(costs, lg, pack.lengths)


def intent_reward(sig: SessionSignature, gen_phi: np.ndarray,
                  pack: GroundPack) -> tuple[float, float, int]:
    """(raw_dis, raw_topic, index of the closest reference session)."""
    if pack.size == 0:
        raise EmptyGroundSet("no reference sessions")
    distances = distances_to_ground(sig, pack)
    nearest = int(distances.argmin())
    raw_dis = 1.0 - float(distances[nearest])
    eud = float(np.linalg.norm(gen_phi - pack.phis[nearest]))
    raw_topic = 1.0 - min(eud, SQRT2) / SQRT2
    return raw_dis, raw_topic, nearest


def termination_reward(sig: SessionSignature, same_intent: list[SessionSignature],
                       k_last: int = 2, top_k: int = 5,
                       q_ground: SessionSignature | None = None) -> tuple[float, float]:
    """(raw_match in {0,1}, raw_recall in [0,1]).

    raw_match: the generated session's last k_last tokens equal those of at
    least one same-intent reference session. raw_recall: overlap of the final
    top-k display rows against the closest reference session (the closest
    within same_intent when q_ground is not given).
    """
    if sig.length < k_last:
        raise TooShort(f"session has {sig.length} steps, needs {k_last}")
    tail = tuple(sig.tokens[-k_last:])
    raw_match = 0.0
    for other in same_intent:
        if other.length >= k_last and tuple(other.tokens[-k_last:]) == tail:
            raw_match = 1.0
            break
    if q_ground is None:
        if not same_intent:
            return raw_match, 0.0
        q_ground = min(same_intent, key=lambda other: eda_sim_distance(sig, other))
    ground_rows = q_ground.final_rows(last=k_last, top_k=top_k)
    if not ground_rows:
        return raw_match, 1.0
    gen_rows = sig.final_rows(last=k_last, top_k=top_k)
    return raw_match, len(gen_rows & ground_rows) / len(ground_rows)


@dataclass(frozen=True)
class RewardBreakdown:
    r_latency: float
    r_dis: float
    r_topic: float
    r_intent: float
    r_match: float
    r_recall: float
    r_term: float
    r_total: float
    raw: dict = field(default_factory=dict, compare=False)

    def components(self) -> dict[str, float]:
        return {
            "r_latency": self.r_latency,
            "r_dis": self.r_dis,
            "r_topic": self.r_topic,
            "r_intent": self.r_intent,
            "r_match": self.r_match,
            "r_recall": self.r_recall,
            "r_term": self.r_term,
            "r_total": self.r_total,
        }


def scale(normalized: float) -> float:
    """Affine map of a normalized component from [0, 1] to [-0.5, 0.5]."""
    return float(np.clip(normalized, 0.0, 1.0)) - 0.5


def total_reward(
    norm_latency: float,
    raw_dis: float,
    raw_topic: float,
    raw_match: float,
    raw_recall: float,
    beta: float,
    gamma: float,
    delta: float = 1.0,
    zeta: float = 1.0,
    use_latency: bool = True,
    use_intent: bool = True,
    use_term: bool = True,
) -> RewardBreakdown:
    r_latency = scale(norm_latency)
    r_intent = scale((raw_dis + delta * raw_topic) / (1.0 + delta))
    r_term = scale((raw_match + zeta * raw_recall) / (1.0 + zeta))
    r_total = (
        (r_latency if use_latency else 0.0)
        + beta * (r_intent if use_intent else 0.0)
        + gamma * (r_term if use_term else 0.0)
    )
    return RewardBreakdown(
        r_latency=r_latency,
        r_dis=scale(raw_dis),
        r_topic=scale(raw_topic),
        r_intent=r_intent,
        r_match=scale(raw_match),
        r_recall=scale(raw_recall),
        r_term=r_term,
        r_total=r_total,
        raw={
            "latency": norm_latency,
            "dis": raw_dis,
            "topic": raw_topic,
            "match": raw_match,
            "recall": raw_recall,
        },
    )


class EpisodeRewardComputer:
    """Computes the full end-of-episode breakdown against a reference pack."""

    def __init__(self, pack: GroundPack, encoder: QueryEncoder,
                 intent_model: BitermTopicModel, hyperparams):
        self.pack = pack
        self.encoder = encoder
        self.intent_model = intent_model
        self.hp = hyperparams

    def compute(self, steps: list[StepRecord]) -> RewardBreakdown:
        hp = self.hp
        sig = session_signature(steps, self.encoder)
        _, norm_latency = latency_reward([s.cost_ratio for s in steps])
        gen_phi = self.intent_model.transform([sig.tokens])[0]
        raw_dis, raw_topic, nearest = intent_reward(sig, gen_phi, self.pack)
        label = int(gen_phi.argmax())
        same_intent = [
            self.pack.signatures[g]
            for g in np.flatnonzero(self.pack.labels == label)
        ]
        raw_match, raw_recall = termination_reward(
            sig, same_intent, k_last=hp.k_last, top_k=hp.top_k,
            q_ground=self.pack.signatures[nearest],
        )
        return total_reward(
            norm_latency, raw_dis, raw_topic, raw_match, raw_recall,
            beta=hp.beta, gamma=hp.gamma, delta=hp.delta, zeta=hp.zeta,
            use_latency=hp.use_latency, use_intent=hp.use_intent, use_term=hp.use_term,
        )
