import numpy as np
import pytest

from edapilot.catalog import draw_sample
from edapilot.errors import DegenerateCluster, SizeExceedsTable, UnknownColumn
from edapilot.sampling import (
    ClusterSampler,
    GowerBlocks,
    MaxMinDiversitySampler,
    MaxSumDiversitySampler,
    StratifiedAtMostKSampler,
    StratifiedProportionalSampler,
    SystematicSampler,
    UniformSampler,
)

from conftest import make_table


def test_uniform_identity_case(wide_table):
    handle = draw_sample(wide_table, UniformSampler(tau=1.0), seed=1)
    assert handle.row_count == wide_table.row_count
    assert handle.effective_sr == 1.0


def test_uniform_binomial_size(wide_table):
    n, tau = wide_table.row_count, 0.2
    sigma = (n * tau * (1 - tau)) ** 0.5
    for seed in range(20):
        handle = draw_sample(wide_table, UniformSampler(tau=tau), seed=seed)
        assert abs(handle.row_count - n * tau) <= 4 * sigma


def test_systematic_size_and_stride(wide_table):
    # oracle: from start s, indices are s, s+k, ... -> exactly floor/ceil(n/k)
    handle = draw_sample(wide_table, SystematicSampler(k=10), seed=3)
    assert handle.row_count == 100
    start = int(handle.row_indices[0])
    expected = np.arange(start, wide_table.row_count, 10)
    assert np.array_equal(handle.row_indices, expected)
    assert set(np.diff(handle.row_indices)) == {10}


@pytest.mark.parametrize("k", [3, 7, 13])
def test_systematic_size_bounds(wide_table, k):
    n = wide_table.row_count
    for seed in range(5):
        handle = draw_sample(wide_table, SystematicSampler(k=k), seed=seed)
        assert handle.row_count in (n // k, -(-n // k))


def test_strat_at_most_k_exact():
    # strata sizes {A:5, B:1}; cap 2 -> 2 rows from A, 1 from B
    table = make_table("s", g=["A"] * 5 + ["B"], v=list(range(6)))
    handle = draw_sample(table, StratifiedAtMostKSampler(strat_column="g", cap_K=2), seed=0)
    labels = [table.column("g").values[i] for i in handle.row_indices]
    assert labels.count("A") == 2 and labels.count("B") == 1


def test_strat_at_most_k_cap_exact_per_stratum(wide_table):
    cap = 37
    handle = draw_sample(
        wide_table, StratifiedAtMostKSampler(strat_column="cat", cap_K=cap), seed=5
    )
    cats = wide_table.column("cat").values[handle.row_indices]
    for group in "ABCD":
        assert (cats == group).sum() == cap  # every stratum has 250 rows


def test_strat_proportional_counts_and_representation(wide_table):
    tau = 0.1
    handle = draw_sample(
        wide_table, StratifiedProportionalSampler(strat_column="cat", tau=tau), seed=2
    )
    cats = wide_table.column("cat").values[handle.row_indices]
    for group in "ABCD":
        size = (wide_table.column("cat").values == group).sum()
        got = (cats == group).sum()
        sigma = (size * tau * (1 - tau)) ** 0.5
        assert abs(got - tau * size) <= 4 * sigma
        assert got >= 1


def test_strat_proportional_represents_tiny_strata():
    table = make_table("tiny", g=["A"] * 99 + ["B"], v=list(range(100)))
    handle = draw_sample(
        table, StratifiedProportionalSampler(strat_column="g", tau=0.05), seed=4
    )
    labels = list(table.column("g").values[handle.row_indices])
    assert "B" in labels


def test_strat_unknown_column(wide_table):
    with pytest.raises(UnknownColumn):
        draw_sample(wide_table, StratifiedProportionalSampler(strat_column="nope", tau=0.1), 0)


def test_cluster_membership_and_counts(wide_table):
    tau = 0.2
    handle = draw_sample(wide_table, ClusterSampler(n_clusters=5, tau=tau), seed=7)
    labels = handle.strategy.cluster_labels_
    chosen = set(handle.row_indices.tolist())
    for c in range(5):
        members = np.flatnonzero(labels == c)
        got = len(chosen & set(members.tolist()))
        sigma = (len(members) * tau * (1 - tau)) ** 0.5
        assert abs(got - tau * len(members)) <= max(4 * sigma, 1.0)


def test_cluster_degenerate():
    table = make_table("small", v=[1.0, 2.0], g=["a", "b"])
    with pytest.raises(DegenerateCluster):
        draw_sample(table, ClusterSampler(n_clusters=5, tau=0.5), seed=0)


def test_diversity_sizes(wide_table):
    for cls in (MaxMinDiversitySampler, MaxSumDiversitySampler):
        handle = draw_sample(wide_table, cls(size=25, candidate_pool=200), seed=9)
        assert handle.row_count == 25
        assert np.unique(handle.row_indices).size == 25


def test_diversity_size_exceeds_table():
    table = make_table("small", v=[1.0, 2.0, 3.0])
    with pytest.raises(SizeExceedsTable):
        draw_sample(table, MaxMinDiversitySampler(size=10), seed=0)


def test_maxmin_running_minimum_non_increasing(wide_table):
    handle = draw_sample(wide_table, MaxMinDiversitySampler(size=30, candidate_pool=150), seed=1)
    trace = handle.strategy.min_pairwise_trace_
    assert all(a >= b for a, b in zip(trace, trace[1:]))


def test_maxsum_gain_non_increasing(wide_table):
    handle = draw_sample(wide_table, MaxSumDiversitySampler(size=30, candidate_pool=150), seed=1)
    gains = handle.strategy.gain_trace_
    assert len(gains) == 15
    assert all(a >= b for a, b in zip(gains, gains[1:]))


def test_maxmin_greedy_matches_bruteforce_oracle():
    # tiny pool: exhaustive check that each greedy step picks the argmax
    table = make_table("t", x=[0.0, 1.0, 0.2, 0.9, 0.5, 0.05], g=["a"] * 6)
    sampler = MaxMinDiversitySampler(size=4, candidate_pool=6, random_state=0)
    sampler.fit(table)
    blocks = GowerBlocks(table)
    pool = np.arange(6)
    dist = blocks.pairwise(pool, pool).astype(float)
    np.fill_diagonal(dist, -1.0)
    i, j = np.unravel_index(dist.argmax(), dist.shape)
    selected = [int(i), int(j)]
    while len(selected) < 4:
        best, best_val = None, -1.0
        for cand in range(6):
            if cand in selected:
                continue
            val = min(dist[cand, s] for s in selected)
            if val > best_val:
                best, best_val = cand, val
        selected.append(best)
    assert sorted(selected) == sampler.row_indices_.tolist()


def test_determinism_bit_exact(wide_table):
    strategies = [
        UniformSampler(tau=0.3),
        SystematicSampler(k=7),
        StratifiedProportionalSampler(strat_column="cat", tau=0.2),
        StratifiedAtMostKSampler(strat_column="cat", cap_K=11),
        ClusterSampler(n_clusters=4, tau=0.3),
        MaxMinDiversitySampler(size=12, candidate_pool=100),
        MaxSumDiversitySampler(size=12, candidate_pool=100),
    ]
    for strat in strategies:
        a = draw_sample(wide_table, strat, seed=42)
        b = draw_sample(wide_table, strat, seed=42)
        assert np.array_equal(a.row_indices, b.row_indices), strat.kind


def test_effective_sr_exact(wide_table):
    handle = draw_sample(wide_table, UniformSampler(tau=0.33), seed=6)
    assert handle.effective_sr == handle.row_count / wide_table.row_count


def test_gower_distance_properties(wide_table):
    blocks = GowerBlocks(wide_table)
    idx = np.arange(20)
    d = blocks.pairwise(idx, idx)
    assert np.allclose(np.diag(d), 0.0, atol=1e-6)
    assert np.allclose(d, d.T, atol=1e-6)
    assert float(d.min()) >= 0.0 and float(d.max()) <= 1.0 + 1e-6
