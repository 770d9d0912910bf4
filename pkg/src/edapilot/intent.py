"""Latent-intent mining over query sessions.

Sessions are tokenized (one token per query), every unordered token pair in
a session becomes a biterm, and a biterm topic model trained by collapsed
Gibbs sampling assigns each session a probability distribution over K
intents. Coherence (UCI / pointwise mutual information over session
co-occurrence) picks K.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .engine import AggFunc, Cmp, OpType, Query
from .errors import EmptyCorpus
from .tabular import NULL_LABEL

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an install-time dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


_CMP_TOKEN = {Cmp.EQ: "Eq", Cmp.NEQ: "Neq", Cmp.GT: "Gt", Cmp.LT: "Lt", Cmp.CONTAINS: "Contains"}
_AGG_TOKEN = {AggFunc.COUNT: "Count", AggFunc.SUM: "Sum", AggFunc.AVG: "Avg"}


def tokenize(queries: list[Query]) -> list[str]:
    """One stable token per query; filter terms are not part of the token."""
    tokens = []
    for q in queries:
        if q.op_type is OpType.BACK:
            tokens.append("B")
        elif q.op_type is OpType.FILTER:
            tokens.append(f"F:{q.attr}:{_CMP_TOKEN[q.cmp]}")
        else:
            tokens.append(
                f"G:{q.group_attr}:{_AGG_TOKEN[q.agg_func]}:{q.agg_attr or NULL_LABEL}"
            )
    return tokens


def extract_biterms(tokens: list[str]) -> list[tuple[str, str]]:
    """All C(m,2) unordered position pairs; sequences under 2 tokens yield none."""
    out = []
    for i in range(len(tokens)):
        for j in range(i + 1, len(tokens)):
            a, b = tokens[i], tokens[j]
            out.append((a, b) if a <= b else (b, a))
    return out


@njit(cache=True)
def _gibbs_kernel(bw1, bw2, z, n_z, n_wz, alpha, beta, uniforms):  # pragma: no cover
    n_biterms = bw1.shape[0]
    n_topics, vocab = n_wz.shape
    probs = np.empty(n_topics)
    for sweep in range(uniforms.shape[0]):
        for i in range(n_biterms):
            w1, w2 = bw1[i], bw2[i]
            old = z[i]
            n_z[old] -= 1
            n_wz[old, w1] -= 1
            n_wz[old, w2] -= 1
            total = 0.0
            for k in range(n_topics):
                nsum = 2.0 * n_z[k]
                same = 1.0 if w1 == w2 else 0.0
                p = (
                    (n_z[k] + alpha)
                    * (n_wz[k, w1] + beta)
                    * (n_wz[k, w2] + beta + same)
                    / ((nsum + vocab * beta) * (nsum + 1.0 + vocab * beta))
                )
                probs[k] = p
                total += p
            u = uniforms[sweep, i] * total
            new = 0
            acc = probs[0]
            while acc < u and new < n_topics - 1:
                new += 1
                acc += probs[new]
            z[i] = new
            n_z[new] += 1
            n_wz[new, w1] += 1
            n_wz[new, w2] += 1


class BitermTopicModel(BaseEstimator):
    """Biterm topic model fit by collapsed Gibbs sampling.

    ``fit`` takes a corpus of token sequences (one per session), ``transform``
    returns per-sequence intent distributions, ``predict`` their argmax.
    alpha defaults to 50/K; training is bit-deterministic per random_state.
    """

    def __init__(self, n_topics: int = 4, alpha: float | None = None,
                 beta_prior: float = 0.01, iterations: int = 500, random_state: int = 0,
                 n_restarts: int = 4):
        self.n_topics = n_topics
        self.alpha = alpha
        self.beta_prior = beta_prior
        self.iterations = iterations
        self.random_state = random_state
        self.n_restarts = n_restarts

    # -- fitting ------------------------------------------------------------

    def fit(self, docs: list[list[str]], y=None, init_topics: np.ndarray | None = None):
        vocab = sorted({t for doc in docs for t in doc})
        self.vocabulary_ = {t: i for i, t in enumerate(vocab)}
        w1, w2 = [], []
        for doc in docs:
            for a, b in extract_biterms(doc):
                w1.append(self.vocabulary_[a])
                w2.append(self.vocabulary_[b])
        if not w1:
            raise EmptyCorpus("corpus yields no biterms")
        bw1 = np.asarray(w1, dtype=np.int64)
        bw2 = np.asarray(w2, dtype=np.int64)

        # Gibbs chains get stuck in merged-topic optima on well-separated
        # corpora; run seeded restarts and keep the best-likelihood chain.
        # An injected initialization pins a single chain.
        restarts = 1 if init_topics is not None else max(1, self.n_restarts)
        best = None
        for restart in range(restarts):
            fit = self._run_chain(bw1, bw2, len(self.vocabulary_), restart, init_topics)
            if best is None or fit["loglik"] > best["loglik"]:
                best = fit

        self.alpha_ = best["alpha"]
        self.assignments_ = best["z"]
        self.assignment_counts_ = best["n_z"]
        self.topic_word_ = best["topic_word"]
        self.topic_prior_ = best["topic_prior"]
        self.loglik_ = best["loglik"]
        self.initial_topics_ = init_topics
        return self

    def _run_chain(self, bw1, bw2, v: int, restart: int,
                   init_topics: np.ndarray | None) -> dict:
        n_b = len(bw1)
        k = self.n_topics
        alpha = self.alpha if self.alpha is not None else 50.0 / k
        rng = np.random.default_rng((self.random_state, restart))
        if init_topics is None:
            z = rng.integers(0, k, size=n_b).astype(np.int64)
        else:
            z = np.asarray(init_topics, dtype=np.int64).copy()
            if len(z) != n_b:
                raise ValueError(f"init_topics has {len(z)} entries, expected {n_b}")
        n_z = np.zeros(k, dtype=np.float64)
        n_wz = np.zeros((k, v), dtype=np.float64)
        for i in range(n_b):
            n_z[z[i]] += 1
            n_wz[z[i], bw1[i]] += 1
            n_wz[z[i], bw2[i]] += 1

        uniforms = rng.random((self.iterations, n_b))
        _gibbs_kernel(bw1, bw2, z, n_z, n_wz, float(alpha), float(self.beta_prior), uniforms)

        topic_word = (n_wz + self.beta_prior) / (2.0 * n_z[:, None] + v * self.beta_prior)
        topic_prior = (n_z + alpha) / (n_b + k * alpha)
        per_biterm = (topic_prior[:, None] * topic_word[:, bw1] * topic_word[:, bw2]).sum(axis=0)
        loglik = float(np.log(np.clip(per_biterm, 1e-300, None)).sum())
        return {
            "alpha": float(alpha),
            "z": z,
            "n_z": n_z.copy(),
            "topic_word": topic_word,
            "topic_prior": topic_prior,
            "loglik": loglik,
        }

    # -- inference ----------------------------------------------------------

    def _biterm_posterior(self, i: int, j: int) -> np.ndarray:
        p = self.topic_prior_ * self.topic_word_[:, i] * self.topic_word_[:, j]
        total = p.sum()
        return p / total if total > 0 else np.full(self.n_topics, 1.0 / self.n_topics)

    def transform(self, docs: list[list[str]]) -> np.ndarray:
        out = np.zeros((len(docs), self.n_topics))
        for d, doc in enumerate(docs):
            known = [t for t in doc if t in self.vocabulary_]
            acc = np.zeros(self.n_topics)
            count = 0
            for a, b in extract_biterms(known):
                acc += self._biterm_posterior(self.vocabulary_[a], self.vocabulary_[b])
                count += 1
            out[d] = acc / count if count else self.topic_prior_
        return out

    def predict(self, docs: list[list[str]]) -> np.ndarray:
        return self.transform(docs).argmax(axis=1)

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        vocab = [t for t, _ in sorted(self.vocabulary_.items(), key=lambda kv: kv[1])]
        return {
            "format": "btm-model/1",
            "n_topics": self.n_topics,
            "alpha": self.alpha_,
            "beta_prior": self.beta_prior,
            "iterations": self.iterations,
            "random_state": self.random_state,
            "vocabulary": vocab,
            "topic_word": self.topic_word_.tolist(),
            "topic_prior": self.topic_prior_.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BitermTopicModel":
        model = cls(
            n_topics=payload["n_topics"],
            alpha=payload["alpha"],
            beta_prior=payload["beta_prior"],
            iterations=payload["iterations"],
            random_state=payload["random_state"],
        )
        model.alpha_ = payload["alpha"]
        model.vocabulary_ = {t: i for i, t in enumerate(payload["vocabulary"])}
        model.topic_word_ = np.asarray(payload["topic_word"])
        model.topic_prior_ = np.asarray(payload["topic_prior"])
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BitermTopicModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class IntentDistribution:
    probs: np.ndarray
    argmax_intent: int

    @staticmethod
    def from_probs(probs: np.ndarray) -> "IntentDistribution":
        return IntentDistribution(probs=probs, argmax_intent=int(np.argmax(probs)))


def infer(model: BitermTopicModel, queries: list[Query]) -> IntentDistribution:
    probs = model.transform([tokenize(queries)])[0]
    return IntentDistribution.from_probs(probs)


# ---------------------------------------------------------------------------
# Coherence-driven choice of K


UCI_EPS = 0.01


def uci_scores(corpus: list[list[str]], labels: np.ndarray, n_topics: int,
               eps: float = UCI_EPS) -> float:
    """Overall UCI score: mean over intents of mean pairwise PMI of the intent's
    tokens, with probabilities from session-level document frequencies.

    Zero co-occurrence counts are floored at eps so the log stays finite and
    incoherent groupings (token pairs that never share a session) are
    penalized; positive counts enter exactly. Intents with fewer than two
    distinct tokens score 0.
    """
    m = len(corpus)
    doc_freq: dict[str, int] = {}
    pair_freq: dict[tuple[str, str], int] = {}
    for doc in corpus:
        distinct = sorted(set(doc))
        for t in distinct:
            doc_freq[t] = doc_freq.get(t, 0) + 1
        for pair in combinations(distinct, 2):
            pair_freq[pair] = pair_freq.get(pair, 0) + 1

    per_intent = []
    for k in range(n_topics):
        tokens = sorted({t for doc, lab in zip(corpus, labels) if lab == k for t in doc})
        scores = [
            math.log(max(pair_freq.get((a, b), 0), eps) * m / (doc_freq[a] * doc_freq[b]))
            for a, b in combinations(tokens, 2)
        ]
        per_intent.append(sum(scores) / len(scores) if scores else 0.0)
    return sum(per_intent) / n_topics


def uci_select_k(
    corpus: list[list[str]],
    k_range: range | list[int],
    alpha: float | None = None,
    beta_prior: float = 0.01,
    iterations: int = 500,
    random_state: int = 0,
) -> tuple[int, dict[int, float]]:
    """Train one model per K, score each by UCI, return (best K, scores).
    Ties go to the smaller K."""
    scores: dict[int, float] = {}
    best_k, best_score = None, -math.inf
    for k in k_range:
        model = BitermTopicModel(
            n_topics=k, alpha=alpha, beta_prior=beta_prior,
            iterations=iterations, random_state=random_state,
        ).fit(corpus)
        labels = model.predict(corpus)
        score = uci_scores(corpus, labels, k)
        scores[k] = score
        if score > best_score:
            best_k, best_score = k, score
    return best_k, scores
