"""Policy and value networks: two-hidden-layer tanh MLPs with hand-derived
gradients (checked against central finite differences in the test suite)
and an RMSprop update."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HIDDEN = 64


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Mlp:
    """input -> 64 tanh -> 64 tanh -> linear output."""

    def __init__(self, sizes: list[int], rng: np.random.Generator):
        self.sizes = list(sizes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    def forward(self, x: np.ndarray):
        h = x
        activations = [x]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = np.tanh(z) if i < len(self.weights) - 1 else z
            activations.append(h)
        return h, activations

    def backward(self, activations, d_out: np.ndarray):
        """Gradients of a scalar loss given d loss / d output."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = d_out
        for i in reversed(range(len(self.weights))):
            grads_w[i] = activations[i].T @ delta
            grads_b[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * (1.0 - activations[i] ** 2)
        return grads_w, grads_b

    # flat parameter vector helpers (finite differences, checkpoints)

    def get_flat(self) -> np.ndarray:
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        )

    def set_flat(self, flat: np.ndarray) -> None:
        pos = 0
        for w in self.weights:
            w[...] = flat[pos : pos + w.size].reshape(w.shape)
            pos += w.size
        for b in self.biases:
            b[...] = flat[pos : pos + b.size].reshape(b.shape)
            pos += b.size

    @staticmethod
    def flat_grads(grads_w, grads_b) -> np.ndarray:
        return np.concatenate([g.ravel() for g in grads_w] + [g.ravel() for g in grads_b])


class RmsProp:
    def __init__(self, size: int, lr: float, alpha: float = 0.99, eps: float = 1e-5):
        self.lr = lr
        self.alpha = alpha
        self.eps = eps
        self.sq = np.zeros(size)

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        self.sq = self.alpha * self.sq + (1.0 - self.alpha) * grads**2
        return params - self.lr * grads / (np.sqrt(self.sq) + self.eps)


@dataclass
class Losses:
    policy: float
    value: float
    entropy: float
    total: float


class PolicyValueNets:
    def __init__(self, state_width: int, n_actions: int, seed: int = 0,
                 hidden: int = HIDDEN):
        rng = np.random.default_rng(seed)
        self.policy = Mlp([state_width, hidden, hidden, n_actions], rng)
        self.value = Mlp([state_width, hidden, hidden, 1], rng)
        self.n_actions = n_actions
        self.state_width = state_width
        self.seed = seed
        self.hidden = hidden

    def action_probs(self, states: np.ndarray) -> np.ndarray:
        logits, _ = self.policy.forward(np.atleast_2d(states))
        return softmax(logits)

    def state_values(self, states: np.ndarray) -> np.ndarray:
        out, _ = self.value.forward(np.atleast_2d(states))
        return out[:, 0]

    # A2C losses: policy = -mean(log pi(a|s) * A) - ent_coef * mean entropy,
    # value = mean((R - V)^2), total = policy + vf_coef * value.

    def policy_loss(self, states, actions, advantages, ent_coef) -> float:
        probs = self.action_probs(states)
        n = len(actions)
        logp = np.log(np.clip(probs[np.arange(n), actions], 1e-12, None))
        entropy = -(probs * np.log(np.clip(probs, 1e-12, None))).sum(axis=1)
        return float(-(logp * advantages).mean() - ent_coef * entropy.mean())

    def value_loss(self, states, returns) -> float:
        v = self.state_values(states)
        return float(((returns - v) ** 2).mean())

    def losses_and_grads(self, states, actions, returns, ent_coef, vf_coef):
        states = np.atleast_2d(states)
        n = states.shape[0]
        logits, pol_acts = self.policy.forward(states)
        probs = softmax(logits)
        values, val_acts = self.value.forward(states)
        values = values[:, 0]
        advantages = returns - values  # treated as constants for the policy loss

        logp = np.log(np.clip(probs[np.arange(n), actions], 1e-12, None))
        entropy = -(probs * np.log(np.clip(probs, 1e-12, None))).sum(axis=1)
        policy_loss = float(-(logp * advantages).mean() - ent_coef * entropy.mean())
        value_loss = float(((returns - values) ** 2).mean())
        total = policy_loss + vf_coef * value_loss

        # d policy_loss / d logits
        onehot = np.zeros_like(probs)
        onehot[np.arange(n), actions] = 1.0
        d_logits = -(advantages[:, None] * (onehot - probs)) / n
        d_logits += ent_coef / n * probs * (
            np.log(np.clip(probs, 1e-12, None)) + entropy[:, None]
        )
        pol_w, pol_b = self.policy.backward(pol_acts, d_logits)

        # d value_loss / d output
        d_v = (-2.0 * (returns - values) / n)[:, None]
        val_w, val_b = self.value.backward(val_acts, d_v)

        grads = {
            "policy": Mlp.flat_grads(pol_w, pol_b),
            "value": Mlp.flat_grads(val_w, val_b),
        }
        return Losses(policy_loss, value_loss, float(entropy.mean()), total), grads

    # -- persistence --------------------------------------------------------

    def to_dict(self) -> dict:
        def pack(mlp: Mlp) -> dict:
            flat = mlp.get_flat()
            return {
                "sizes": mlp.sizes,
                "params": base64.b64encode(flat.astype("<f8").tobytes()).decode("ascii"),
            }

        return {
            "format": "policy-value-nets/1",
            "state_width": self.state_width,
            "n_actions": self.n_actions,
            "hidden": self.hidden,
            "seed": self.seed,
            "policy": pack(self.policy),
            "value": pack(self.value),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PolicyValueNets":
        nets = cls(payload["state_width"], payload["n_actions"], seed=payload["seed"],
                   hidden=payload["hidden"])

        def unpack(mlp: Mlp, entry: dict) -> None:
            flat = np.frombuffer(base64.b64decode(entry["params"]), dtype="<f8")
            mlp.set_flat(flat.copy())

        unpack(nets.policy, payload["policy"])
        unpack(nets.value, payload["value"])
        return nets


def select_action(nets: PolicyValueNets, state: np.ndarray, mode: str = "greedy",
                  rng: np.random.Generator | None = None) -> int:
    probs = nets.action_probs(state)[0]
    if mode == "greedy":
        return int(probs.argmax())
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode requires an rng")
        return int(rng.choice(len(probs), p=probs))
    raise ValueError(f"unknown mode {mode!r}")


def save_checkpoint(path: str | Path, nets: PolicyValueNets, hyperparams: dict,
                    batches_done: int) -> None:
    payload = {
        "nets": nets.to_dict(),
        "hyperparams": hyperparams,
        "batches_done": batches_done,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[PolicyValueNets, dict, int]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return (
        PolicyValueNets.from_dict(payload["nets"]),
        payload["hyperparams"],
        payload["batches_done"],
    )
