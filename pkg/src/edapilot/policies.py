"""Source-selection policies pluggable into session generation and the
live service, plus the string registry the CLI and service share."""

from __future__ import annotations

import numpy as np

from .agent.nets import PolicyValueNets, select_action
from .agent.state import StateEncoder
from .baselines import BaselinePolicy, BlinkDb, CiGreedy, baseline_select
from .catalog import SampleCatalog
from .errors import ConfigError
from .simulator import FixedSamplePolicy, FullDataPolicy
from .tabular import ColumnStats, Table


class BaselineSourcePolicy:
    def __init__(self, policy: BaselinePolicy, catalog: SampleCatalog,
                 stats: dict[str, ColumnStats]):
        self.policy = policy
        self.catalog = catalog
        self.stats = stats

    def choose(self, state, query, step):
        sample_id = baseline_select(self.policy, query, state.history,
                                    self.catalog, self.stats)
        return self.catalog.by_id(sample_id)


class AgentSourcePolicy:
    """Greedy by default (live sessions never explore); sampling mode is for
    training-time rollouts."""

    def __init__(self, nets: PolicyValueNets, encoder: StateEncoder,
                 catalog: SampleCatalog, mode: str = "greedy",
                 rng: np.random.Generator | None = None):
        self.nets = nets
        self.encoder = encoder
        self.catalog = catalog
        self.mode = mode
        self.rng = rng

    def choose(self, state, query, step):
        vec = self.encoder.encode_flat(state.history)
        action = select_action(self.nets, vec, mode=self.mode, rng=self.rng)
        return self.catalog.handles[action]


def make_policy(
    spec: str,
    table: Table,
    stats: dict[str, ColumnStats],
    catalog: SampleCatalog | None,
    nets: PolicyValueNets | None = None,
    encoder: StateEncoder | None = None,
):
    """Policy from a spec string: full | agent | blinkdb | cigreedy | fixed:<id>."""
    if spec == "full":
        return FullDataPolicy(table)
    if catalog is None:
        raise ConfigError(f"policy {spec!r} needs a sample catalog")
    if spec == "agent":
        if nets is None or encoder is None:
            raise ConfigError("agent policy needs a trained checkpoint")
        return AgentSourcePolicy(nets, encoder, catalog)
    if spec == "blinkdb":
        return BaselineSourcePolicy(BlinkDb(), catalog, stats)
    if spec == "cigreedy":
        return BaselineSourcePolicy(CiGreedy(), catalog, stats)
    if spec.startswith("fixed:"):
        return FixedSamplePolicy(catalog, spec.split(":", 1)[1])
    raise ConfigError(f"unknown policy spec {spec!r}")
