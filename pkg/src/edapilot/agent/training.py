"""Advantage actor-critic over episodes.

Rewards exist only at episode end, so the episode's total reward is credited
to every step as its return; the advantage at a step is that return minus
the value estimate. Batches of n_envs episodes share one gradient step.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Protocol

import numpy as np

from ..catalog import SampleCatalog
from ..errors import NonFiniteLoss
from ..intent import BitermTopicModel
from ..simulator import SessionRecord, SimulatorConfig, generate_session
from ..tabular import Table, compute_stats
from .nets import PolicyValueNets, RmsProp, select_action
from .rewards import EpisodeRewardComputer, RewardBreakdown, build_ground_pack
from .state import QueryEncoder, StateEncoder

SelectFn = Callable[[np.ndarray, np.random.Generator], int]


@dataclass
class Hyperparams:
    beta: float = 0.5
    gamma: float = 0.5
    delta: float = 1.0
    zeta: float = 1.0
    lr: float = 0.0007
    vf_coef: float = 0.25
    ent_coef: float = 0.01
    n_envs: int = 8
    episodes: int = 2000
    k_last: int = 2
    top_k: int = 5
    seed: int = 0
    hidden: int = 64
    use_latency: bool = True
    use_intent: bool = True
    use_term: bool = True
    reward_ground_max: int = 400

    def to_dict(self) -> dict:
        return asdict(self)


class EpisodeEnv(Protocol):
    def run_episode(
        self, select: SelectFn, episode_index: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray, RewardBreakdown]: ...


def train_loop(env: EpisodeEnv, nets: PolicyValueNets, hp: Hyperparams):
    """Run A2C episodes against the environment; returns the per-batch log."""
    policy_opt = RmsProp(nets.policy.get_flat().size, hp.lr)
    value_opt = RmsProp(nets.value.get_flat().size, hp.lr)
    log: list[dict] = []

    def select(state_vec: np.ndarray, rng: np.random.Generator) -> int:
        return select_action(nets, state_vec, mode="sample", rng=rng)

    episode = 0
    batch = 0
    while episode < hp.episodes:
        batch_states, batch_actions, batch_returns = [], [], []
        breakdowns: list[RewardBreakdown] = []
        for _ in range(min(hp.n_envs, hp.episodes - episode)):
            rng = np.random.default_rng((hp.seed, 104729, episode))
            states, actions, breakdown = env.run_episode(select, episode, rng)
            batch_states.append(states)
            batch_actions.append(actions)
            batch_returns.append(np.full(len(actions), breakdown.r_total))
            breakdowns.append(breakdown)
            episode += 1

        states = np.concatenate(batch_states)
        actions = np.concatenate(batch_actions)
        returns = np.concatenate(batch_returns)
        losses, grads = nets.losses_and_grads(
            states, actions, returns, hp.ent_coef, hp.vf_coef
        )
        if not (math.isfinite(losses.total) and np.isfinite(grads["policy"]).all()
                and np.isfinite(grads["value"]).all()):
            raise NonFiniteLoss(
                f"batch {batch}: policy={losses.policy} value={losses.value}"
            )
        nets.policy.set_flat(policy_opt.step(nets.policy.get_flat(), grads["policy"]))
        nets.value.set_flat(value_opt.step(nets.value.get_flat(),
                                           hp.vf_coef * grads["value"]))

        entry = {
            "batch": batch,
            "episodes": episode,
            "entropy": losses.entropy,
            "policy_loss": losses.policy,
            "value_loss": losses.value,
        }
        for key in ("r_total", "r_latency", "r_intent", "r_term", "r_dis",
                    "r_topic", "r_match", "r_recall"):
            entry[f"mean_{key}"] = float(
                np.mean([bd.components()[key] for bd in breakdowns])
            )
        log.append(entry)
        batch += 1
    return log


class EdaEnv:
    """Episode environment that rolls the simulator while the policy picks,
    per query, which catalog sample the engine scans."""

    def __init__(
        self,
        sim_config: SimulatorConfig,
        table: Table,
        catalog: SampleCatalog,
        reward_computer: EpisodeRewardComputer,
        state_encoder: StateEncoder,
        sim_seed: int,
    ):
        self.sim_config = sim_config
        self.table = table
        self.stats = state_encoder.query_encoder.stats
        self.catalog = catalog
        self.reward_computer = reward_computer
        self.state_encoder = state_encoder
        self.sim_seed = sim_seed

    def run_episode(self, select: SelectFn, episode_index: int, rng):
        states: list[np.ndarray] = []
        actions: list[int] = []
        env = self

        class _PolicyAdapter:
            def choose(self, state, query, step):
                vec = env.state_encoder.encode_flat(state.history)
                action = select(vec, rng)
                states.append(vec)
                actions.append(action)
                return env.catalog.handles[action]

        record = generate_session(
            self.sim_config, self.table, self.stats, _PolicyAdapter(),
            seed=self.sim_seed, session_index=episode_index,
        )
        breakdown = self.reward_computer.compute(record.steps)
        return np.stack(states), np.asarray(actions), breakdown


def a2c_train(
    sim_config: SimulatorConfig,
    table: Table,
    catalog: SampleCatalog,
    ground_sessions: list[SessionRecord],
    intent_model: BitermTopicModel,
    hp: Hyperparams,
    stats=None,
    sim_seed: int | None = None,
) -> tuple[PolicyValueNets, list[dict]]:
    """Algorithm: per episode, the simulator emits queries, the policy picks a
    sample per query, rewards land once at episode end, and n_envs episodes
    form one gradient step."""
    if len(catalog) == 0:
        raise ValueError("catalog is empty")
    stats = stats if stats is not None else compute_stats(table)
    encoder = QueryEncoder(table, stats)
    pack = build_ground_pack(
        ground_sessions[: hp.reward_ground_max], encoder, intent_model
    )
    reward_computer = EpisodeRewardComputer(pack, encoder, intent_model, hp)
    state_encoder = StateEncoder(table, stats, intent_model)
    env = EdaEnv(
        sim_config, table, catalog, reward_computer, state_encoder,
        sim_seed=sim_seed if sim_seed is not None else hp.seed + 1_000_003,
    )
    nets = PolicyValueNets(state_encoder.width, len(catalog), seed=hp.seed,
                           hidden=hp.hidden)
    log = train_loop(env, nets, hp)
    return nets, log
