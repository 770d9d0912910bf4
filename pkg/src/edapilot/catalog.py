"""Materialized sample catalog: the controller's action space.

Samples are views (sorted row-index arrays) over the parent table. The
catalog persists as one raw little-endian int64 index file per sample plus
a JSON manifest, all byte-deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import clone

from .errors import DuplicateSampleId, MissingSample
from .sampling import BaseSampler, derive_seed, strategy_from_dict, strategy_to_dict
from .tabular import Table

MANIFEST_NAME = "manifest.json"
FULL_SOURCE_ID = "FULL"


@dataclass(frozen=True)
class SampleHandle:
    sample_id: str
    row_indices: np.ndarray
    effective_sr: float
    strategy: BaseSampler
    strat_columns_used: frozenset[str]
    parent: Table

    @property
    def row_count(self) -> int:
        return len(self.row_indices)

    def __repr__(self):
        return (
            f"SampleHandle({self.sample_id!r}, rows={self.row_count}, "
            f"sr={self.effective_sr:.4g})"
        )


def draw_sample(table: Table, strategy: BaseSampler, seed: int) -> SampleHandle:
    fitted = clone(strategy)
    fitted.set_params(random_state=int(seed))
    fitted.fit(table)
    return SampleHandle(
        sample_id=fitted.sample_id(),
        row_indices=fitted.row_indices_,
        effective_sr=fitted.effective_sr_,
        strategy=fitted,
        strat_columns_used=fitted.strat_columns_used_,
        parent=table,
    )


@dataclass
class SampleCatalog:
    parent: Table
    parent_hash: str
    seed: int
    handles: list[SampleHandle] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.handles)

    @property
    def sample_ids(self) -> list[str]:
        return [h.sample_id for h in self.handles]

    def by_id(self, sample_id: str) -> SampleHandle:
        for h in self.handles:
            if h.sample_id == sample_id:
                return h
        raise MissingSample(f"no sample {sample_id!r} in catalog")

    def subset(self, keep) -> "SampleCatalog":
        """Catalog restricted to handles passing the predicate (action-space ablations)."""
        kept = [h for h in self.handles if keep(h)]
        return SampleCatalog(self.parent, self.parent_hash, self.seed, kept)


def build_catalog(
    table: Table,
    strategies: list[BaseSampler],
    seed: int,
    out_dir: str | Path | None = None,
) -> SampleCatalog:
    if not strategies:
        raise ValueError("strategies must be non-empty")
    ids = [s.sample_id() for s in strategies]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        raise DuplicateSampleId(f"duplicate sample ids: {sorted(dupes)}")

    handles = []
    for strategy in strategies:
        child_seed = derive_seed(seed, strategy.sample_id())
        handles.append(draw_sample(table, strategy, child_seed))
    catalog = SampleCatalog(
        parent=table, parent_hash=table.content_hash(), seed=seed, handles=handles
    )
    if out_dir is not None:
        save_catalog(catalog, out_dir)
    return catalog


def _index_filename(sample_id: str) -> str:
    return sample_id.replace("/", "_").replace(" ", "_") + ".idx"


def save_catalog(catalog: SampleCatalog, out_dir: str | Path,
                 extra: dict | None = None) -> Path:
    out = Path(out_dir)
    indices_dir = out / "indices"
    indices_dir.mkdir(parents=True, exist_ok=True)
    samples = []
    for h in catalog.handles:
        fname = _index_filename(h.sample_id)
        (indices_dir / fname).write_bytes(h.row_indices.astype("<i8").tobytes())
        samples.append(
            {
                "sample_id": h.sample_id,
                "strategy": strategy_to_dict(h.strategy),
                "row_count": h.row_count,
                "effective_sr": h.effective_sr,
                "strat_columns": sorted(h.strat_columns_used),
                "index_file": f"indices/{fname}",
            }
        )
    manifest = {
        "parent": {
            "name": catalog.parent.name,
            "content_hash": catalog.parent_hash,
            "row_count": catalog.parent.row_count,
        },
        "seed": catalog.seed,
        "samples": samples,
        **(extra or {}),
    }
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_catalog(out_dir: str | Path, table: Table) -> SampleCatalog:
    out = Path(out_dir)
    manifest = json.loads((out / MANIFEST_NAME).read_text(encoding="utf-8"))
    table_hash = table.content_hash()
    if manifest["parent"]["content_hash"] != table_hash:
        raise ValueError(
            f"catalog was built for table hash {manifest['parent']['content_hash'][:12]}..., "
            f"got {table_hash[:12]}..."
        )
    handles = []
    for entry in manifest["samples"]:
        raw = (out / entry["index_file"]).read_bytes()
        indices = np.frombuffer(raw, dtype="<i8").astype(np.int64)
        strategy = strategy_from_dict(entry["strategy"])
        handles.append(
            SampleHandle(
                sample_id=entry["sample_id"],
                row_indices=indices,
                effective_sr=entry["effective_sr"],
                strategy=strategy,
                strat_columns_used=frozenset(entry["strat_columns"]),
                parent=table,
            )
        )
    return SampleCatalog(
        parent=table,
        parent_hash=manifest["parent"]["content_hash"],
        seed=manifest["seed"],
        handles=handles,
    )
