"""Run configuration: one JSON file per run, CLI flags override file values,
and every artifact embeds the resolved config's hash."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agent.training import Hyperparams
from .errors import ConfigError

DEFAULT_METHODS = ["agent", "blinkdb", "cigreedy", "fixed:Uni@10%", "fixed:Uni@1%"]


def _default_sessions() -> dict:
    return {"n_ground": 600, "ground_seed": 123, "eval_n": 1000, "eval_seed": 999}


def _default_btm() -> dict:
    return {"k_range": [2, 8], "iterations": 500, "alpha": None,
            "beta_prior": 0.01, "fixed_k": None, "seed": 7}


@dataclass
class RunConfig:
    dataset: str = "synthetic:50000"
    out_dir: str = "run"
    seed: int = 11
    max_rows: int = 10_000_000
    schema_hint: dict[str, str] = field(default_factory=dict)
    strat_columns: list[str] = field(default_factory=lambda: ["month", "carrier", "origin", "day_of_week"])
    at_most_k_columns: list[str] = field(default_factory=lambda: ["carrier", "origin"])
    templates: str = "default"
    btm: dict = field(default_factory=_default_btm)
    sessions: dict = field(default_factory=_default_sessions)
    agent: dict = field(default_factory=dict)
    methods: list[str] = field(default_factory=lambda: list(DEFAULT_METHODS))
    recall_k: int | None = 5
    action_space: str = "all"
    service: dict = field(default_factory=lambda: {"host": "127.0.0.1", "port": 8520})

    def validate(self) -> None:
        if self.sessions["eval_seed"] == self.sessions["ground_seed"]:
            raise ConfigError("eval_seed must differ from ground_seed (held-out protocol)")
        lo, hi = self.btm["k_range"]
        if not (2 <= lo <= hi <= 15):
            raise ConfigError(f"k_range must lie within [2, 15], got {self.btm['k_range']}")
        if self.action_space not in ACTION_SPACES:
            raise ConfigError(f"unknown action space {self.action_space!r}")

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(**{**{"seed": self.seed}, **self.agent})

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "max_rows": self.max_rows,
            "schema_hint": self.schema_hint,
            "strat_columns": self.strat_columns,
            "at_most_k_columns": self.at_most_k_columns,
            "templates": self.templates,
            "btm": self.btm,
            "sessions": self.sessions,
            "agent": self.agent,
            "methods": self.methods,
            "recall_k": self.recall_k,
            "action_space": self.action_space,
            "service": self.service,
        }

    def config_hash(self) -> str:
        payload = {k: v for k, v in self.to_dict().items() if k != "out_dir"}
        canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    @staticmethod
    def from_dict(payload: dict) -> "RunConfig":
        base = RunConfig()
        known = set(base.to_dict())
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {**base.to_dict(), **payload}
        merged["btm"] = {**_default_btm(), **merged.get("btm", {})}
        merged["sessions"] = {**_default_sessions(), **merged.get("sessions", {})}
        return RunConfig(**merged)

    @staticmethod
    def load(path: str | Path) -> "RunConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return RunConfig.from_dict(payload)

    def save(self, path: str | Path) -> None:
        payload = self.to_dict()
        payload["config_hash"] = self.config_hash()
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


ACTION_SPACES = {
    "uniform": ("uniform",),
    "uniform+strat": ("uniform", "strat_proportional", "strat_at_most_k"),
    "uniform+strat+cluster": ("uniform", "strat_proportional", "strat_at_most_k", "cluster"),
    "all": None,
}


def filter_action_space(catalog, action_space: str):
    kinds = ACTION_SPACES[action_space]
    if kinds is None:
        return catalog
    return catalog.subset(lambda h: h.strategy.kind in kinds)
