"""Pipeline orchestration: ingest -> build-samples -> simulate -> train-btm
-> train-agent -> evaluate -> report, plus serve for the live session API.

Every command reads the run config (file + flag overrides), writes versioned
artifacts under the output directory, and is reproducible byte-for-byte for
fixed seeds; wall-clock goes only into run_meta.json.

Exit codes: 0 ok, 2 config error, 3 data error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .agent.nets import load_checkpoint, save_checkpoint
from .agent.state import StateEncoder
from .catalog import build_catalog, load_catalog, save_catalog
from .config import RunConfig, filter_action_space
from .errors import ConfigError, EdaPilotError, NonFiniteLoss
from .evaluation import render_report_tables, run_evaluation, write_report_json
from .intent import BitermTopicModel, tokenize, uci_select_k
from .policies import make_policy
from .simulator import FullDataPolicy, SimulatorConfig, generate_sessions, unique_session_count
from .synth import default_simulator_config, default_strategy_grid, make_synthetic_table
from .tabular import ColumnType, Table, compute_stats, load_csv, write_csv


def _touch_meta(out: Path, command: str) -> None:
    meta_path = out / "run_meta.json"
    meta = {}
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    meta[command] = {"finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_table(cfg: RunConfig) -> Table:
    out = _out(cfg)
    meta = json.loads((out / "table_meta.json").read_text(encoding="utf-8"))
    hint = {k: ColumnType(v) for k, v in meta["schema"].items()}
    return load_csv(out / "table.csv", schema_hint=hint, max_rows=cfg.max_rows,
                    name=meta["name"])


def _load_templates(cfg: RunConfig) -> SimulatorConfig:
    out = _out(cfg)
    return SimulatorConfig.load(out / "templates.json")


def _ground_sessions(cfg: RunConfig, table, stats, sim_config):
    return generate_sessions(
        sim_config, table, FullDataPolicy(table),
        n=cfg.sessions["n_ground"], seed=cfg.sessions["ground_seed"], stats=stats,
    )


def cmd_ingest(cfg: RunConfig) -> int:
    out = _out(cfg)
    cfg.save(out / "config.json")
    if cfg.dataset.startswith("synthetic:"):
        n_rows = int(cfg.dataset.split(":", 1)[1])
        table = make_synthetic_table(n_rows=n_rows, seed=cfg.seed)
    else:
        hint = {k: ColumnType(v) for k, v in cfg.schema_hint.items()} or None
        table = load_csv(cfg.dataset, schema_hint=hint, max_rows=cfg.max_rows)
    write_csv(table, out / "table.csv")
    meta = {
        "name": table.name,
        "row_count": table.row_count,
        "content_hash": table.content_hash(),
        "schema": {c.name: c.ctype.value for c in table.columns},
        "config_hash": cfg.config_hash(),
    }
    (out / "table_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if cfg.templates == "default":
        sim_config = default_simulator_config(seed=cfg.seed)
    else:
        sim_config = SimulatorConfig.load(cfg.templates)
    sim_config.validate()
    payload = sim_config.to_dict()
    payload["config_hash"] = cfg.config_hash()
    (out / "templates.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _touch_meta(out, "ingest")
    print(f"ingested {table.name}: {table.row_count} rows, "
          f"hash {meta['content_hash'][:12]}")
    return 0


def cmd_build_samples(cfg: RunConfig) -> int:
    out = _out(cfg)
    table = _load_table(cfg)
    grid = default_strategy_grid(
        table,
        strat_columns=tuple(cfg.strat_columns),
        at_most_k_columns=tuple(cfg.at_most_k_columns),
    )
    catalog = build_catalog(table, grid, seed=cfg.seed)
    save_catalog(catalog, out / "catalog", extra={"config_hash": cfg.config_hash()})
    _touch_meta(out, "build-samples")
    print(f"built {len(catalog)} samples")
    for h in catalog.handles:
        print(f"  {h.sample_id}: {h.row_count} rows, sr={h.effective_sr:.4f}")
    return 0


def cmd_simulate(cfg: RunConfig, n: int | None = None) -> int:
    out = _out(cfg)
    table = _load_table(cfg)
    stats = compute_stats(table)
    sim_config = _load_templates(cfg)
    count = n if n is not None else cfg.sessions["n_ground"]
    sessions = generate_sessions(
        sim_config, table, FullDataPolicy(table),
        n=count, seed=cfg.sessions["ground_seed"], stats=stats,
    )
    from .engine import step_to_log_record

    with open(out / "sessions.jsonl", "w", encoding="utf-8") as fh:
        for s in sessions:
            for i, rec in enumerate(s.steps):
                fh.write(json.dumps(step_to_log_record(s.session_id, i, rec),
                                    sort_keys=True))
                fh.write("\n")
    summary = {
        "n": count,
        "unique": unique_session_count(sessions),
        "table": {"name": table.name, "content_hash": table.content_hash()},
        "config_hash": cfg.config_hash(),
    }
    (out / "sessions_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    _touch_meta(out, "simulate")
    print(f"simulated {count} sessions ({summary['unique']} unique)")
    return 0


def cmd_train_btm(cfg: RunConfig) -> int:
    out = _out(cfg)
    table = _load_table(cfg)
    stats = compute_stats(table)
    sim_config = _load_templates(cfg)
    sessions = _ground_sessions(cfg, table, stats, sim_config)
    corpus = [tokenize(s.queries) for s in sessions]
    btm_cfg = cfg.btm
    if btm_cfg.get("fixed_k"):
        best_k, scores = int(btm_cfg["fixed_k"]), {}
    else:
        lo, hi = btm_cfg["k_range"]
        best_k, scores = uci_select_k(
            corpus, range(lo, hi + 1), alpha=btm_cfg["alpha"],
            beta_prior=btm_cfg["beta_prior"], iterations=btm_cfg["iterations"],
            random_state=btm_cfg["seed"],
        )
    model = BitermTopicModel(
        n_topics=best_k, alpha=btm_cfg["alpha"], beta_prior=btm_cfg["beta_prior"],
        iterations=btm_cfg["iterations"], random_state=btm_cfg["seed"],
    ).fit(corpus)
    payload = model.to_dict()
    payload["config_hash"] = cfg.config_hash()
    (out / "btm.json").write_text(
        json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8"
    )
    (out / "btm_selection.json").write_text(
        json.dumps(
            {"best_k": best_k, "scores": {str(k): v for k, v in scores.items()},
             "config_hash": cfg.config_hash()},
            indent=2, sort_keys=True,
        ) + "\n",
        encoding="utf-8",
    )
    _touch_meta(out, "train-btm")
    print(f"trained biterm model at K={best_k}; "
          f"scores: {{{', '.join(f'{k}: {v:.3f}' for k, v in scores.items())}}}")
    return 0


def cmd_train_agent(cfg: RunConfig) -> int:
    from .agent.training import a2c_train

    out = _out(cfg)
    table = _load_table(cfg)
    stats = compute_stats(table)
    sim_config = _load_templates(cfg)
    catalog = filter_action_space(load_catalog(out / "catalog", table), cfg.action_space)
    model = BitermTopicModel.from_dict(
        json.loads((out / "btm.json").read_text(encoding="utf-8"))
    )
    ground = _ground_sessions(cfg, table, stats, sim_config)
    hp = cfg.hyperparams()
    nets, log = a2c_train(sim_config, table, catalog, ground, model, hp, stats=stats)
    save_checkpoint(
        out / "checkpoint.json", nets,
        {**hp.to_dict(), "action_space": cfg.action_space,
         "config_hash": cfg.config_hash()},
        batches_done=len(log),
    )
    with open(out / "training_log.jsonl", "w", encoding="utf-8") as fh:
        for entry in log:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    _touch_meta(out, "train-agent")
    tail = log[-1] if log else {}
    print(f"trained agent: {len(log)} batches, "
          f"final mean reward {tail.get('mean_r_total', float('nan')):.4f}")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    out = _out(cfg)
    table = _load_table(cfg)
    stats = compute_stats(table)
    sim_config = _load_templates(cfg)
    catalog = filter_action_space(load_catalog(out / "catalog", table), cfg.action_space)
    model = BitermTopicModel.from_dict(
        json.loads((out / "btm.json").read_text(encoding="utf-8"))
    )
    nets = encoder = None
    if any(m == "agent" for m in cfg.methods):
        nets, _, _ = load_checkpoint(out / "checkpoint.json")
        encoder = StateEncoder(table, stats, model)
    methods = [
        (spec, make_policy(spec, table, stats, catalog, nets=nets, encoder=encoder))
        for spec in cfg.methods
    ]
    report = run_evaluation(
        methods, sim_config, table, stats, catalog, model,
        n=cfg.sessions["eval_n"], seed=cfg.sessions["eval_seed"],
        recall_k=cfg.recall_k,
        normalize_to="agent" if "agent" in cfg.methods else None,
    )
    write_report_json(report, out / "eval", config_hash=cfg.config_hash())
    _touch_meta(out, "evaluate")
    for m in report.methods:
        print(f"{m.name}: ED={m.intent_divergence:.4f} "
              f"latency_median={m.latency['median']:.3f} mean_recall={m.mean_recall:.3f}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    out = _out(cfg)
    payload = json.loads((out / "eval" / "report.json").read_text(encoding="utf-8"))
    table = render_report_tables(payload, out / "eval")
    _touch_meta(out, "report")
    print(table, end="")
    return 0


def cmd_serve(cfg: RunConfig) -> int:
    import os

    import uvicorn

    from .service import load_runtime, create_app

    runtime = load_runtime(Path(cfg.out_dir))
    app = create_app(runtime)
    host, port = cfg.service["host"], int(cfg.service["port"])
    bind = os.environ.get("EDAPILOT_BIND")
    if bind:
        host, _, bind_port = bind.partition(":")
        port = int(bind_port or port)
    uvicorn.run(app, host=host, port=port)
    return 0


PIPELINE = ["ingest", "build-samples", "simulate", "train-btm", "train-agent",
            "evaluate", "report"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edapilot",
        description="Approximate EDA with learned, intent-aware sample selection.",
    )
    parser.add_argument("command", choices=PIPELINE + ["serve", "pipeline"])
    parser.add_argument("--config", help="run config JSON file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--dataset", help="CSV path or synthetic:<rows>")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--n", type=int, help="session count for simulate")
    parser.add_argument("--k-range", help="BTM K range, e.g. 2:8")
    parser.add_argument("--ablate-reward", choices=["term", "intent", "latency"])
    parser.add_argument("--action-space",
                        choices=["uniform", "uniform+strat", "uniform+strat+cluster", "all"])
    parser.add_argument("--delta", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--episodes", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.out:
        cfg.out_dir = args.out
    if args.dataset:
        cfg.dataset = args.dataset
    if args.seed is not None:
        cfg.seed = args.seed
    if args.k_range:
        lo, _, hi = args.k_range.partition(":")
        cfg.btm["k_range"] = [int(lo), int(hi or lo)]
    if args.action_space:
        cfg.action_space = args.action_space
    for name in ("delta", "beta", "gamma", "episodes"):
        value = getattr(args, name)
        if value is not None:
            cfg.agent[name] = value
    if args.ablate_reward:
        cfg.agent[f"use_{args.ablate_reward}"] = False
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "build-samples":
            return cmd_build_samples(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, n=args.n)
        if args.command == "train-btm":
            return cmd_train_btm(cfg)
        if args.command == "train-agent":
            return cmd_train_agent(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "report":
            return cmd_report(cfg)
        if args.command == "serve":
            return cmd_serve(cfg)
        if args.command == "pipeline":
            for step in PIPELINE:
                code = main([step] + _passthrough(args))
                if code != 0:
                    return code
            return 0
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteLoss as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4
    except (EdaPilotError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


def _passthrough(args: argparse.Namespace) -> list[str]:
    out = []
    if args.config:
        out += ["--config", args.config]
    if args.out:
        out += ["--out", args.out]
    if args.dataset:
        out += ["--dataset", args.dataset]
    if args.seed is not None:
        out += ["--seed", str(args.seed)]
    if args.k_range:
        out += ["--k-range", args.k_range]
    if args.action_space:
        out += ["--action-space", args.action_space]
    if args.ablate_reward:
        out += ["--ablate-reward", args.ablate_reward]
    for name in ("delta", "beta", "gamma", "episodes"):
        value = getattr(args, name)
        if value is not None:
            out += [f"--{name}", str(value)]
    return out


if __name__ == "__main__":
    sys.exit(main())
