import numpy as np
import pytest

from edapilot.agent.nets import PolicyValueNets, select_action
from edapilot.agent.rewards import total_reward
from edapilot.agent.training import Hyperparams, train_loop
from edapilot.errors import NonFiniteLoss


class BanditEnv:
    """Stateless 3-action environment with fixed per-action rewards: the
    optimal policy is known by construction."""

    def __init__(self, rewards=(0.1, 0.9, 0.2), state_width=8):
        self.rewards = rewards
        self.state = np.ones(state_width)

    def run_episode(self, select, episode_index, rng):
        action = select(self.state, rng)
        raw = self.rewards[action]
        breakdown = total_reward(raw, raw, raw, raw, raw, beta=0.5, gamma=0.5)
        return self.state[None, :], np.array([action]), breakdown


def test_bandit_converges_to_best_action():
    env = BanditEnv()
    hp = Hyperparams(episodes=2000, n_envs=8, seed=3)
    nets = PolicyValueNets(8, 3, seed=3)
    train_loop(env, nets, hp)
    assert select_action(nets, env.state, mode="greedy") == 1
    assert nets.action_probs(env.state)[0][1] >= 0.95


def test_large_entropy_keeps_policy_diffuse():
    env = BanditEnv()
    hp = Hyperparams(episodes=2000, n_envs=8, seed=3, ent_coef=10.0)
    nets = PolicyValueNets(8, 3, seed=3)
    train_loop(env, nets, hp)
    assert nets.action_probs(env.state)[0].max() < 0.5


def test_zero_learning_rate_leaves_params_bit_identical():
    env = BanditEnv()
    hp = Hyperparams(episodes=64, n_envs=8, seed=3, lr=0.0)
    nets = PolicyValueNets(8, 3, seed=3)
    before_p = nets.policy.get_flat().copy()
    before_v = nets.value.get_flat().copy()
    train_loop(env, nets, hp)
    assert np.array_equal(nets.policy.get_flat(), before_p)
    assert np.array_equal(nets.value.get_flat(), before_v)


def test_training_log_structure():
    env = BanditEnv()
    hp = Hyperparams(episodes=32, n_envs=8, seed=1)
    nets = PolicyValueNets(8, 3, seed=1)
    log = train_loop(env, nets, hp)
    assert len(log) == 4
    for i, entry in enumerate(log):
        assert entry["batch"] == i
        for key in ("mean_r_total", "mean_r_latency", "mean_r_intent", "mean_r_term",
                    "entropy", "policy_loss", "value_loss"):
            assert key in entry


def test_training_deterministic_per_seed():
    results = []
    for _ in range(2):
        env = BanditEnv()
        hp = Hyperparams(episodes=160, n_envs=8, seed=12)
        nets = PolicyValueNets(8, 3, seed=12)
        train_loop(env, nets, hp)
        results.append(nets.policy.get_flat())
    assert np.array_equal(results[0], results[1])


class ExplodingEnv(BanditEnv):
    def run_episode(self, select, episode_index, rng):
        states, actions, breakdown = super().run_episode(select, episode_index, rng)
        bad = total_reward(1.0, 1.0, 1.0, 1.0, 1.0, beta=float("nan"), gamma=0.5)
        return states, actions, bad


def test_non_finite_loss_aborts():
    env = ExplodingEnv()
    hp = Hyperparams(episodes=16, n_envs=8, seed=1)
    nets = PolicyValueNets(8, 3, seed=1)
    with pytest.raises(NonFiniteLoss):
        train_loop(env, nets, hp)
