"""Approximate EDA with learned, intent-aware sample selection.

Pipeline: load a table, materialize a catalog of samples (the action
space), mine latent intents from simulated analyst sessions with a biterm
topic model, train an actor-critic controller that picks the sample each
query runs on, and evaluate against fixed and adaptive baselines.
"""

from .catalog import SampleCatalog, SampleHandle, build_catalog, draw_sample, load_catalog
from .engine import AggFunc, Cmp, DisplayResult, OpType, Query, SessionState, execute
from .intent import BitermTopicModel, IntentDistribution, infer, tokenize, uci_select_k
from .sampling import (
    ClusterSampler,
    MaxMinDiversitySampler,
    MaxSumDiversitySampler,
    StratifiedAtMostKSampler,
    StratifiedProportionalSampler,
    SystematicSampler,
    UniformSampler,
)
from .simulator import IntentTemplate, SimulatorConfig, generate_sessions
from .tabular import ColumnStats, ColumnType, Table, compute_stats, load_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "AggFunc",
    "BitermTopicModel",
    "ClusterSampler",
    "Cmp",
    "ColumnStats",
    "ColumnType",
    "DisplayResult",
    "IntentDistribution",
    "IntentTemplate",
    "MaxMinDiversitySampler",
    "MaxSumDiversitySampler",
    "OpType",
    "Query",
    "SampleCatalog",
    "SampleHandle",
    "SessionState",
    "SimulatorConfig",
    "StratifiedAtMostKSampler",
    "StratifiedProportionalSampler",
    "SystematicSampler",
    "Table",
    "UniformSampler",
    "build_catalog",
    "compute_stats",
    "draw_sample",
    "execute",
    "generate_sessions",
    "infer",
    "load_catalog",
    "load_csv",
    "tokenize",
    "uci_select_k",
    "write_csv",
]
