"""Bundled synthetic dataset, default intent templates, and the default
sampling grid used by the end-to-end evaluation.

The dataset is a flights-style table tuned so that small uniform samples
distort bar charts enough to flip dominance branches and drill targets: the
top two carriers are close, and the leading delay month beats the runner-up
by a modest margin that per-month noise at a 1% rate frequently erases.
"""

from __future__ import annotations

import numpy as np

from .engine import AggFunc
from .sampling import (
    BaseSampler,
    ClusterSampler,
    MaxMinDiversitySampler,
    MaxSumDiversitySampler,
    StratifiedAtMostKSampler,
    StratifiedProportionalSampler,
    SystematicSampler,
    UniformSampler,
)
from .simulator import (
    IntentTemplate,
    SimulatorConfig,
    back_step,
    drill_or_pivot,
    drill_top_bar,
    filter_above_mean,
    filter_below_mean,
    filter_top_category,
    group_by,
)
from .tabular import Column, ColumnType, Table

MONTHS = ["JAN", "FEB", "MAR", "APR", "MAY", "JUN",
          "JUL", "AUG", "SEP", "OCT", "NOV", "DEC"]
CARRIERS = ["AA", "BX", "CQ", "DL", "EV", "FX", "GQ", "HA"]
ORIGINS = [f"AP{i:02d}" for i in range(20)]


def make_synthetic_table(n_rows: int = 50_000, seed: int = 11,
                         name: str = "synthetic_trips") -> Table:
    rng = np.random.default_rng(seed)

    month_p = np.array([7, 7, 8, 8, 9, 12, 10, 9, 8, 8, 7, 7], dtype=float)
    month_p /= month_p.sum()
    month = rng.choice(len(MONTHS), size=n_rows, p=month_p)

    # leader/runner-up count ratio ~1.22: dominant on full data at a 1.15
    # threshold, frequently not on a 1% sample
    carrier_p = np.array([16.5, 13.5, 12.5, 12.0, 12.0, 12.0, 11.5, 10.0])
    carrier_p /= carrier_p.sum()
    carrier = rng.choice(len(CARRIERS), size=n_rows, p=carrier_p)

    origin_p = np.concatenate([[3.2, 2.4], np.linspace(2.2, 0.6, len(ORIGINS) - 2)])
    origin_p /= origin_p.sum()
    origin = rng.choice(len(ORIGINS), size=n_rows, p=origin_p)

    day_of_week = rng.integers(1, 8, size=n_rows).astype(float)

    # JUN leads high-delay counts with a modest margin over JUL
    month_shift = np.array([0, 0, 1, 1, 2, 11, 6, 4, 2, 1, 0, 0], dtype=float)
    carrier_shift = np.array([2, 3, 1, 0, 0, 1, 0, 4], dtype=float)
    delay = (
        rng.exponential(scale=11.0, size=n_rows)
        + month_shift[month] * rng.random(n_rows) * 2.4
        + carrier_shift[carrier]
        - 4.0
    )
    distance = rng.lognormal(mean=6.2, sigma=0.5, size=n_rows)
    price = distance * 0.12 + rng.normal(45.0, 12.0, size=n_rows) + origin * 0.8

    columns = (
        Column("month", ColumnType.CATEGORICAL,
               np.array([MONTHS[i] for i in month], dtype=object)),
        Column("carrier", ColumnType.CATEGORICAL,
               np.array([CARRIERS[i] for i in carrier], dtype=object)),
        Column("origin", ColumnType.CATEGORICAL,
               np.array([ORIGINS[i] for i in origin], dtype=object)),
        Column("day_of_week", ColumnType.INTEGER, day_of_week),
        Column("delay", ColumnType.REAL, np.round(delay, 3)),
        Column("distance", ColumnType.REAL, np.round(distance, 3)),
        Column("price", ColumnType.REAL, np.round(price, 3)),
    )
    return Table(name=name, columns=columns, row_count=n_rows)


def default_simulator_config(seed: int = 0) -> SimulatorConfig:
    """Four planted intents. Each has a dominance branch whose full-data bar
    ratio clears the threshold while small-sample noise flips it, followed by
    a drill phase that compounds the flip: the diverged path drills into the
    pivot's bars, the faithful path falls back to an unconditioned schema."""
    t1 = IntentTemplate(
        intent_id="delay-by-month",
        length_range=(5, 8),
        phases=(
            ((filter_above_mean("delay"), 1.0),),
            ((group_by("month"), 1.0),),
            ((drill_or_pivot(1.22, alt=group_by("carrier", AggFunc.AVG, "delay")), 0.8),
             (group_by("origin", AggFunc.AVG, "delay"), 0.2)),
            ((drill_top_bar(), 0.75), (group_by("origin"), 0.25)),
            ((group_by("origin", AggFunc.AVG, "delay"), 0.7),
             (group_by("month", AggFunc.AVG, "delay"), 0.3)),
            ((group_by("month", AggFunc.AVG, "delay"), 0.6), (back_step(), 0.4)),
            ((group_by("origin"), 1.0),),
            ((group_by("month"), 1.0),),
        ),
    )
    t2 = IntentTemplate(
        intent_id="carrier-performance",
        length_range=(5, 8),
        phases=(
            ((group_by("carrier", AggFunc.AVG, "delay"), 1.0),),
            ((group_by("carrier"), 1.0),),
            ((drill_or_pivot(1.10, alt=group_by("month", AggFunc.AVG, "delay")), 0.8),
             (group_by("day_of_week", AggFunc.AVG, "delay"), 0.2)),
            ((drill_top_bar(), 0.75), (filter_above_mean("delay"), 0.25)),
            ((group_by("day_of_week", AggFunc.AVG, "delay"), 0.7), (back_step(), 0.3)),
            ((group_by("carrier", AggFunc.AVG, "delay"), 0.7),
             (group_by("day_of_week", AggFunc.AVG, "delay"), 0.3)),
            ((group_by("carrier"), 1.0),),
            ((group_by("day_of_week", AggFunc.AVG, "delay"), 1.0),),
        ),
    )
    t3 = IntentTemplate(
        intent_id="route-volume",
        length_range=(5, 8),
        phases=(
            ((filter_above_mean("distance"), 1.0),),
            ((group_by("origin"), 1.0),),
            ((drill_or_pivot(1.12, alt=group_by("month", AggFunc.SUM, "price")), 0.8),
             (group_by("origin", AggFunc.SUM, "price"), 0.2)),
            ((drill_top_bar(), 0.7), (group_by("origin", AggFunc.SUM, "price"), 0.3)),
            ((back_step(), 0.4), (group_by("origin", AggFunc.AVG, "price"), 0.6)),
            ((group_by("month", AggFunc.SUM, "price"), 1.0),),
            ((group_by("origin"), 1.0),),
            ((group_by("origin", AggFunc.AVG, "price"), 1.0),),
        ),
    )
    t4 = IntentTemplate(
        intent_id="weekday-price",
        length_range=(5, 8),
        phases=(
            ((group_by("day_of_week"), 1.0),),
            ((group_by("month"), 1.0),),
            ((drill_or_pivot(1.12, alt=group_by("carrier", AggFunc.SUM, "price")), 0.8),
             (filter_below_mean("price"), 0.2)),
            ((drill_top_bar(), 0.7), (group_by("day_of_week", AggFunc.AVG, "price"), 0.3)),
            ((group_by("day_of_week", AggFunc.SUM, "price"), 0.7), (back_step(), 0.3)),
            ((group_by("day_of_week"), 1.0),),
            ((group_by("day_of_week", AggFunc.AVG, "price"), 1.0),),
            ((filter_top_category("carrier", 4), 1.0),),
        ),
    )
    return SimulatorConfig(
        templates=(t1, t2, t3, t4),
        intent_mixture=(0.3, 0.3, 0.2, 0.2),
        drill_softmax_temp=0.15,
        seed=seed,
    )


def default_strategy_grid(
    table: Table,
    strat_columns: tuple[str, ...] = ("month", "carrier", "origin", "day_of_week"),
    at_most_k_columns: tuple[str, ...] = ("carrier", "origin"),
) -> list[BaseSampler]:
    """Twenty-nine strategies over six families, scaled to the table size."""
    n = table.row_count
    rates = (0.01, 0.05, 0.1)
    grid: list[BaseSampler] = []
    grid += [UniformSampler(tau=t, name=f"Uni@{t * 100:g}%") for t in rates]
    grid += [SystematicSampler(k=k, name=f"Sys@{k}") for k in (100, 20, 10)]
    grid += [ClusterSampler(n_clusters=10, tau=t, name=f"Clus@{t * 100:g}%") for t in rates]
    div_size = max(2, round(0.05 * n))
    pool = min(n, 2 * div_size)
    grid.append(MaxMinDiversitySampler(size=div_size, candidate_pool=pool, name="MaxMin@5%"))
    grid.append(MaxSumDiversitySampler(size=div_size, candidate_pool=pool, name="MaxSum@5%"))
    for ci, col in enumerate(at_most_k_columns, start=1):
        n_strata = max(1, len({v for v in table.column(col).values if v is not None}))
        for rate in (0.02, 0.06, 0.12):
            cap = max(1, round(rate * n / n_strata))
            grid.append(
                StratifiedAtMostKSampler(strat_column=col, cap_K=cap,
                                         name=f"KStrat{ci}@{cap}")
            )
    for ci, col in enumerate(strat_columns, start=1):
        for t in rates:
            grid.append(
                StratifiedProportionalSampler(strat_column=col, tau=t,
                                              name=f"Strat{ci}@{t * 100:g}%")
            )
    return grid
