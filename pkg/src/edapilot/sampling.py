"""Sampling strategies that build the controller's action space.

Seven strategy families, each an estimator: construct with parameters,
call ``fit(table)``, read ``row_indices_`` / ``effective_sr_``. Fitting is
bit-deterministic for a fixed (table, parameters, random_state).
"""

from __future__ import annotations

import hashlib

import numpy as np
from sklearn.base import BaseEstimator

from .errors import DegenerateCluster, SizeExceedsTable, UnknownColumn
from .tabular import NULL_LABEL, Table, compute_stats


def stable_hash64(text: str) -> int:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_seed(seed: int, sample_id: str) -> int:
    return (int(seed) ^ stable_hash64(sample_id)) & 0x7FFFFFFFFFFFFFFF


def _format_rate(tau: float) -> str:
    return f"{tau * 100:g}%"


def _strata_codes(table: Table, column: str) -> tuple[np.ndarray, list[str]]:
    """Integer stratum code per row; nulls form their own stratum."""
    col = table.column(column)
    if col.ctype.is_numeric:
        keys = np.where(np.isnan(col.values), NULL_LABEL, col.values.astype(str))
    else:
        keys = np.array([NULL_LABEL if v is None else v for v in col.values], dtype=object)
    uniq, codes = np.unique(keys.astype(str), return_inverse=True)
    return codes, list(uniq)


def table_features(table: Table, stats=None) -> np.ndarray:
    """Standardized numeric columns plus one-hot categoricals, nulls zeroed."""
    stats = stats or compute_stats(table)
    blocks = []
    for col in table.columns:
        if col.ctype.is_numeric:
            st = stats[col.name]
            centred = col.values - (st.mean if st.mean is not None else 0.0)
            scale = st.stddev if st.stddev else 1.0
            blocks.append(np.nan_to_num(centred / scale, nan=0.0)[:, None])
        else:
            codes, uniq = _strata_codes(table, col.name)
            onehot = np.zeros((table.row_count, len(uniq)))
            onehot[np.arange(table.row_count), codes] = 1.0
            blocks.append(onehot)
    return np.hstack(blocks) if blocks else np.zeros((table.row_count, 0))


def kmeans_assign(features: np.ndarray, n_clusters: int, rng: np.random.Generator,
                  iterations: int = 25) -> np.ndarray:
    """Plain k-means, fixed iteration count, centers seeded by distinct random rows."""
    n = features.shape[0]
    centers = features[np.sort(rng.choice(n, size=n_clusters, replace=False))].copy()
    labels = np.zeros(n, dtype=np.int64)
    row_sq = (features**2).sum(axis=1)
    for _ in range(iterations):
        d2 = row_sq[:, None] - 2.0 * (features @ centers.T) + (centers**2).sum(axis=1)[None, :]
        labels = d2.argmin(axis=1)
        for c in range(n_clusters):
            members = features[labels == c]
            if members.size:
                centers[c] = members.mean(axis=0)
    return labels


# ---------------------------------------------------------------------------
# Gower distance over mixed columns

class GowerBlocks:
    """Pre-extracted column blocks for pairwise Gower distances."""

    def __init__(self, table: Table, stats=None):
        stats = stats or compute_stats(table)
        self.numeric = []
        self.cat_codes = []
        for col in table.columns:
            if col.ctype.is_numeric:
                rng_ = stats[col.name].value_range
                self.numeric.append((col.values, rng_ if rng_ > 0 else 1.0))
            else:
                codes, _ = _strata_codes(table, col.name)
                self.cat_codes.append(codes)
        self.n_cols = len(self.numeric) + len(self.cat_codes)

    def pairwise(self, idx_a: np.ndarray, idx_b: np.ndarray) -> np.ndarray:
        """Mean per-column distance matrix, shape (|a|, |b|), float32 in [0, 1]."""
        total = np.zeros((len(idx_a), len(idx_b)), dtype=np.float32)
        for values, rng_ in self.numeric:
            a = (values[idx_a] / rng_).astype(np.float32)
            b = (values[idx_b] / rng_).astype(np.float32)
            d = np.minimum(np.abs(a[:, None] - b[None, :]), np.float32(1.0))
            nan_a, nan_b = np.isnan(a), np.isnan(b)
            if nan_a.any() or nan_b.any():
                d = np.nan_to_num(d, nan=0.0)
                d[nan_a[:, None] | nan_b[None, :]] = 1.0
                d[nan_a[:, None] & nan_b[None, :]] = 0.0
            total += d
        for codes in self.cat_codes:
            total += (codes[idx_a][:, None] != codes[idx_b][None, :]).astype(np.float32)
        if self.n_cols == 0:
            return total
        return total / np.float32(self.n_cols)


# ---------------------------------------------------------------------------
# Strategy estimators

class BaseSampler(BaseEstimator):
    """Shared fit plumbing; subclasses implement _select(table, rng)."""

    kind = "base"

    def fit(self, table: Table, y=None):
        if table.row_count == 0:
            raise SizeExceedsTable("cannot sample from an empty table")
        self._validate(table)
        rng = np.random.default_rng(self.random_state)
        indices = np.asarray(self._select(table, rng), dtype=np.int64)
        self.row_indices_ = np.sort(indices)
        if np.unique(self.row_indices_).size != self.row_indices_.size:
            raise AssertionError(f"{self.sample_id()}: duplicate row indices")
        self.effective_sr_ = len(self.row_indices_) / table.row_count
        self.strat_columns_used_ = frozenset(self._strat_columns())
        return self

    def _validate(self, table: Table) -> None:
        pass

    def _strat_columns(self) -> set[str]:
        return set()

    def sample_id(self) -> str:
        return self.name if self.name else self._default_id()

    def _default_id(self) -> str:
        raise NotImplementedError


class UniformSampler(BaseSampler):
    """Independent Bernoulli row selection at rate tau."""

    kind = "uniform"

    def __init__(self, tau: float = 0.1, random_state: int = 0, name: str | None = None):
        self.tau = tau
        self.random_state = random_state
        self.name = name

    def _validate(self, table):
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")

    def _select(self, table, rng):
        return np.flatnonzero(rng.random(table.row_count) < self.tau)

    def _default_id(self):
        return f"Uni@{_format_rate(self.tau)}"


class SystematicSampler(BaseSampler):
    """Random start in [0, k), then every k-th row."""

    kind = "systematic"

    def __init__(self, k: int = 10, random_state: int = 0, name: str | None = None):
        self.k = k
        self.random_state = random_state
        self.name = name

    def _validate(self, table):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.k > table.row_count:
            raise SizeExceedsTable(f"stride {self.k} exceeds {table.row_count} rows")

    def _select(self, table, rng):
        start = int(rng.integers(0, self.k))
        return np.arange(start, table.row_count, self.k)

    def _default_id(self):
        return f"Sys@{self.k}"


class StratifiedProportionalSampler(BaseSampler):
    """Per-stratum allocation of max(1, round(tau * |g|)) rows without replacement.

    Exact allocation (not per-row Bernoulli) so every non-empty stratum is
    represented, which Bernoulli cannot guarantee for small strata.
    """

    kind = "strat_proportional"

    def __init__(self, strat_column: str = "", tau: float = 0.1,
                 random_state: int = 0, name: str | None = None):
        self.strat_column = strat_column
        self.tau = tau
        self.random_state = random_state
        self.name = name

    def _validate(self, table):
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.strat_column not in table.column_names:
            raise UnknownColumn(f"stratification column {self.strat_column!r} not in table")

    def _select(self, table, rng):
        codes, uniq = _strata_codes(table, self.strat_column)
        chosen = []
        for code in range(len(uniq)):
            members = np.flatnonzero(codes == code)
            take = min(len(members), max(1, round(self.tau * len(members))))
            chosen.append(rng.choice(members, size=take, replace=False))
        return np.concatenate(chosen)

    def _strat_columns(self):
        return {self.strat_column}

    def _default_id(self):
        return f"Strat@{_format_rate(self.tau)}:{self.strat_column}"


class StratifiedAtMostKSampler(BaseSampler):
    """At most cap_K rows per stratum, chosen uniformly without replacement."""

    kind = "strat_at_most_k"

    def __init__(self, strat_column: str = "", cap_K: int = 100,
                 random_state: int = 0, name: str | None = None):
        self.strat_column = strat_column
        self.cap_K = cap_K
        self.random_state = random_state
        self.name = name

    def _validate(self, table):
        if self.cap_K < 1:
            raise ValueError(f"cap_K must be >= 1, got {self.cap_K}")
        if self.strat_column not in table.column_names:
            raise UnknownColumn(f"stratification column {self.strat_column!r} not in table")

    def _select(self, table, rng):
        codes, uniq = _strata_codes(table, self.strat_column)
        chosen = []
        for code in range(len(uniq)):
            members = np.flatnonzero(codes == code)
            take = min(len(members), self.cap_K)
            chosen.append(rng.choice(members, size=take, replace=False))
        return np.concatenate(chosen)

    def _strat_columns(self):
        return {self.strat_column}

    def _default_id(self):
        return f"StratK@{self.cap_K}:{self.strat_column}"


class ClusterSampler(BaseSampler):
    """K-means the rows, then allocate max(1, round(tau * |cluster|)) per cluster."""

    kind = "cluster"

    def __init__(self, n_clusters: int = 10, tau: float = 0.1,
                 random_state: int = 0, name: str | None = None):
        self.n_clusters = n_clusters
        self.tau = tau
        self.random_state = random_state
        self.name = name

    def _validate(self, table):
        if not 0 < self.tau <= 1:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if self.n_clusters < 1:
            raise ValueError(f"n_clusters must be >= 1, got {self.n_clusters}")
        if self.n_clusters > table.row_count:
            raise DegenerateCluster(
                f"{self.n_clusters} clusters for {table.row_count} rows"
            )

    def _select(self, table, rng):
        features = table_features(table)
        self.cluster_labels_ = kmeans_assign(features, self.n_clusters, rng)
        chosen = []
        for c in range(self.n_clusters):
            members = np.flatnonzero(self.cluster_labels_ == c)
            if members.size == 0:
                continue
            take = min(len(members), max(1, round(self.tau * len(members))))
            chosen.append(rng.choice(members, size=take, replace=False))
        return np.concatenate(chosen)

    def _default_id(self):
        return f"Clus@{_format_rate(self.tau)}"


class _DiversitySampler(BaseSampler):
    """Greedy dispersion over a bounded random candidate pool (Gower distance)."""

    def __init__(self, size: int = 100, candidate_pool: int = 2000,
                 random_state: int = 0, name: str | None = None):
        self.size = size
        self.candidate_pool = candidate_pool
        self.random_state = random_state
        self.name = name

    def _validate(self, table):
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")
        if self.size > table.row_count:
            raise SizeExceedsTable(
                f"diversity size {self.size} exceeds {table.row_count} rows"
            )

    def _pool(self, table: Table, rng) -> np.ndarray:
        pool_n = min(table.row_count, max(self.candidate_pool, self.size))
        return np.sort(rng.choice(table.row_count, size=pool_n, replace=False))

    def _select(self, table, rng):
        pool = self._pool(table, rng)
        if self.size == len(pool):
            return pool
        blocks = GowerBlocks(table)
        dist = blocks.pairwise(pool, pool)
        np.fill_diagonal(dist, -1.0)
        picked = self._greedy(dist)
        return pool[np.asarray(picked, dtype=np.int64)]

    def _greedy(self, dist: np.ndarray) -> list[int]:
        raise NotImplementedError


class MaxMinDiversitySampler(_DiversitySampler):
    """Farthest-pair seed, then repeatedly add the point maximizing the minimum
    distance to the selected set (Gonzalez-style greedy)."""

    kind = "max_min_diversity"

    def _greedy(self, dist):
        if self.size == 1:
            return [int(dist.sum(axis=1).argmax())]
        i, j = np.unravel_index(int(dist.argmax()), dist.shape)
        selected = [int(i), int(j)]
        self.min_pairwise_trace_ = [float(dist[i, j])]
        min_dist = np.minimum(dist[i], dist[j])
        min_dist[selected] = -np.inf
        while len(selected) < self.size:
            nxt = int(min_dist.argmax())
            self.min_pairwise_trace_.append(
                min(self.min_pairwise_trace_[-1], float(min_dist[nxt]))
            )
            selected.append(nxt)
            min_dist = np.minimum(min_dist, dist[nxt])
            min_dist[nxt] = -np.inf
        return selected

    def _default_id(self):
        return f"MaxMin@{self.size}"


class MaxSumDiversitySampler(_DiversitySampler):
    """Repeatedly take the farthest remaining pair (dispersion-sum greedy); the
    per-step pair distance is the recorded gain and is non-increasing."""

    kind = "max_sum_diversity"

    def _greedy(self, dist):
        n = dist.shape[0]
        avail = np.ones(n, dtype=bool)
        masked = np.where(avail, dist, -np.inf)
        row_max = masked.max(axis=1)
        row_arg = masked.argmax(axis=1)
        stale = np.zeros(n, dtype=bool)
        selected: list[int] = []
        self.gain_trace_ = []

        def remove(idx: int):
            avail[idx] = False
            row_max[idx] = -np.inf
            np.logical_or(stale, row_arg == idx, out=stale)

        while len(selected) + 1 < self.size:
            r = int(row_max.argmax())
            if stale[r]:
                row = np.where(avail, dist[r], -np.inf)
                row[r] = -np.inf
                row_max[r] = row.max()
                row_arg[r] = row.argmax()
                stale[r] = False
                continue
            c = int(row_arg[r])
            self.gain_trace_.append(float(dist[r, c]))
            selected.extend([r, c])
            remove(r)
            remove(c)
        if len(selected) < self.size:
            # odd target size: close with the point farthest, in sum, from the picks
            sums = dist[:, selected].sum(axis=1)
            sums[~avail] = -np.inf
            selected.append(int(sums.argmax()))
        return selected

    def _default_id(self):
        return f"MaxSum@{self.size}"


STRATEGY_KINDS = {
    cls.kind: cls
    for cls in (
        UniformSampler,
        SystematicSampler,
        StratifiedProportionalSampler,
        StratifiedAtMostKSampler,
        ClusterSampler,
        MaxMinDiversitySampler,
        MaxSumDiversitySampler,
    )
}


def strategy_to_dict(strategy: BaseSampler) -> dict:
    return {"kind": strategy.kind, **strategy.get_params()}


def strategy_from_dict(payload: dict) -> BaseSampler:
    payload = dict(payload)
    kind = payload.pop("kind")
    if kind not in STRATEGY_KINDS:
        raise ValueError(f"unknown strategy kind {kind!r}")
    return STRATEGY_KINDS[kind](**payload)
