"""Live EDA session service.

Hosts interactive sessions over HTTP: the analyst submits FILTER / GROUP /
BACK queries, the configured policy transparently picks the sample each
query runs on, and responses carry full provenance (sample, effective SR,
cost, cumulative latency saved, current intent distribution). Mirror mode
executes the same query on full data side by side for comparison panels;
it never influences selection.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .agent.nets import PolicyValueNets, load_checkpoint
from .agent.state import StateEncoder
from .catalog import FULL_SOURCE_ID, SampleCatalog, load_catalog
from .config import RunConfig
from .engine import DisplayKind, DisplayResult, Query, SessionState, execute
from .errors import ConfigError, EdaPilotError, EmptyStack, TypeMismatch, UnknownColumn
from .intent import BitermTopicModel, tokenize
from .policies import make_policy
from .tabular import ColumnStats, Table, compute_stats


@dataclass
class DatasetBundle:
    table: Table
    stats: dict[str, ColumnStats]
    catalog: SampleCatalog | None
    intent_model: BitermTopicModel | None
    nets: PolicyValueNets | None
    encoder: StateEncoder | None
    config_hash: str
    checkpoint_id: str


@dataclass
class ServiceRuntime:
    datasets: dict[str, DatasetBundle] = field(default_factory=dict)


def load_runtime(out_dir: str | Path) -> ServiceRuntime:
    """Assemble a runtime from pipeline artifacts in one output directory."""
    out = Path(out_dir)
    cfg = RunConfig.from_dict({
        k: v for k, v in json.loads((out / "config.json").read_text()).items()
        if k != "config_hash"
    })
    cfg.out_dir = str(out)
    meta = json.loads((out / "table_meta.json").read_text(encoding="utf-8"))
    from .cli import _load_table

    table = _load_table(cfg)
    stats = compute_stats(table)
    catalog = None
    if (out / "catalog" / "manifest.json").exists():
        catalog = load_catalog(out / "catalog", table)
    intent_model = nets = encoder = None
    checkpoint_id = "none"
    if (out / "btm.json").exists():
        intent_model = BitermTopicModel.from_dict(
            json.loads((out / "btm.json").read_text(encoding="utf-8"))
        )
    if (out / "checkpoint.json").exists() and intent_model is not None:
        nets, _, _ = load_checkpoint(out / "checkpoint.json")
        encoder = StateEncoder(table, stats, intent_model)
        checkpoint_id = hashlib.sha256(
            (out / "checkpoint.json").read_bytes()
        ).hexdigest()[:12]
    bundle = DatasetBundle(
        table=table, stats=stats, catalog=catalog, intent_model=intent_model,
        nets=nets, encoder=encoder, config_hash=meta.get("config_hash", ""),
        checkpoint_id=checkpoint_id,
    )
    return ServiceRuntime(datasets={table.name: bundle})


@dataclass
class LiveSession:
    session_id: str
    dataset: str
    policy_spec: str
    policy: object
    bundle: DatasetBundle
    state: SessionState
    mirror: bool
    steps: list[dict] = field(default_factory=list)
    intent_trace: list[list[float]] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class CreateSessionRequest(BaseModel):
    dataset: str
    policy: str = "agent"
    mirror: bool = False


class QueryRequest(BaseModel):
    op: str
    attr: str | None = None
    cmp: str | None = None
    term: float | str | None = None
    agg: str | None = None
    agg_attr: str | None = None


def _display_payload(display: DisplayResult) -> dict:
    return {
        "kind": display.kind.value,
        "matched_rows": display.matched_rows,
        "group_count": display.group_count,
        "group_attr": display.group_attr,
        "agg_func": display.agg_func.value if display.agg_func else None,
        "groups": [[k, v] for k, v in display.groups],
        "estimates": [[k, v] for k, v in display.estimates],
        "top_rows": [list(t) for t in display.top_rows],
        "vector": [float(x) for x in display.vector],
    }


def _divergence_flag(display: DisplayResult, mirror: DisplayResult | None) -> bool | None:
    """True when the shown top-bar rank order (or top rows) differs from the
    full-data execution."""
    if mirror is None:
        return None
    if display.kind is not mirror.kind:
        return True
    if display.kind is DisplayKind.GROUPED_BARS:
        return [k for k, _ in display.groups[:8]] != [k for k, _ in mirror.groups[:8]]
    return display.top_rows != mirror.top_rows


def create_app(runtime: ServiceRuntime) -> FastAPI:
    app = FastAPI(title="edapilot session service")
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, LiveSession] = {}
    registry_lock = threading.Lock()

    def _session(session_id: str) -> LiveSession:
        live = sessions.get(session_id)
        if live is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return live

    def _stamp(live: LiveSession, payload: dict) -> dict:
        payload["config_hash"] = live.bundle.config_hash
        payload["checkpoint_id"] = live.bundle.checkpoint_id
        return payload

    @app.get("/datasets")
    def list_datasets():
        return [
            {
                "name": name,
                "row_count": b.table.row_count,
                "columns": [
                    {"name": c.name, "type": c.ctype.value} for c in b.table.columns
                ],
                "config_hash": b.config_hash,
                "checkpoint_id": b.checkpoint_id,
                "policies": _available_policies(b),
            }
            for name, b in runtime.datasets.items()
        ]

    @app.get("/catalog")
    def get_catalog():
        out = {}
        for name, b in runtime.datasets.items():
            if b.catalog is None:
                out[name] = []
                continue
            out[name] = [
                {
                    "sample_id": h.sample_id,
                    "row_count": h.row_count,
                    "effective_sr": h.effective_sr,
                    "strategy": h.strategy.kind,
                    "strat_columns": sorted(h.strat_columns_used),
                }
                for h in b.catalog.handles
            ]
        return out

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        bundle = runtime.datasets.get(req.dataset)
        if bundle is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset {req.dataset!r}")
        try:
            policy = make_policy(
                req.policy, bundle.table, bundle.stats, bundle.catalog,
                nets=bundle.nets, encoder=bundle.encoder,
            )
        except (ConfigError, EdaPilotError) as exc:
            raise HTTPException(status_code=404, detail=f"unknown policy: {exc}") from exc
        live = LiveSession(
            session_id=uuid.uuid4().hex,
            dataset=req.dataset,
            policy_spec=req.policy,
            policy=policy,
            bundle=bundle,
            state=SessionState.start(bundle.table, bundle.stats),
            mirror=req.mirror,
        )
        with registry_lock:
            sessions[live.session_id] = live
        return _stamp(live, {"session_id": live.session_id})

    @app.post("/sessions/{session_id}/query")
    def submit_query(session_id: str, req: QueryRequest):
        live = _session(session_id)
        try:
            query = Query.from_dict(
                {k: v for k, v in req.model_dump().items() if v is not None}
            )
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        with live.lock:
            step_index = len(live.steps)
            try:
                source = live.policy.choose(live.state, query, step_index)
                execute(live.state, query, source, mirror=live.mirror)
            except EmptyStack as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except (UnknownColumn, TypeMismatch, ValueError) as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            rec = live.state.history[-1]
            bundle = live.bundle
            if bundle.intent_model is not None:
                probs = bundle.intent_model.transform(
                    [tokenize([r.query for r in live.state.history])]
                )[0].tolist()
            else:
                probs = []
            live.intent_trace.append(probs)
            scanned = sum(r.rows_scanned for r in live.state.history)
            full = sum(r.rows_scanned_full for r in live.state.history)
            saved = 1.0 - scanned / full if full > 0 else 0.0
            sr = (1.0 if rec.sample_id == FULL_SOURCE_ID
                  else bundle.catalog.by_id(rec.sample_id).effective_sr)
            step_payload = {
                "step": step_index,
                "query": query.to_dict(),
                "sample_id": rec.sample_id,
                "effective_sr": sr,
                "rows_scanned": rec.rows_scanned,
                "rows_scanned_full": rec.rows_scanned_full,
                "cost_ratio": rec.cost_ratio,
                "wall_ms": rec.wall_ms,
                "latency_saved_cum": saved,
                "intent_probs": probs,
                "display": _display_payload(rec.display),
                "mirror": (_display_payload(rec.mirror_display)
                           if rec.mirror_display is not None else None),
                "diverged": _divergence_flag(rec.display, rec.mirror_display),
            }
            live.steps.append(step_payload)
            return _stamp(live, dict(step_payload))

    @app.get("/sessions/{session_id}/report")
    def session_report(session_id: str):
        live = _session(session_id)
        with live.lock:
            scanned = sum(r.rows_scanned for r in live.state.history)
            full = sum(r.rows_scanned_full for r in live.state.history)
            return _stamp(live, {
                "session_id": live.session_id,
                "dataset": live.dataset,
                "policy": live.policy_spec,
                "mirror": live.mirror,
                "steps": live.steps,
                "latency_reduction": 1.0 - scanned / full if full > 0 else 0.0,
                "intent_trace": live.intent_trace,
            })

    return app


def _available_policies(bundle: DatasetBundle) -> list[str]:
    out = ["full"]
    if bundle.catalog is not None:
        out += ["blinkdb", "cigreedy"]
        out += [f"fixed:{h.sample_id}" for h in bundle.catalog.handles]
        if bundle.nets is not None:
            out.insert(0, "agent")
    return out
