import json

import numpy as np
import pytest

from edapilot.catalog import build_catalog, draw_sample, load_catalog
from edapilot.errors import DuplicateSampleId, MissingSample
from edapilot.sampling import SystematicSampler, UniformSampler

from conftest import make_table


@pytest.fixture(scope="module")
def table():
    gen = np.random.default_rng(4)
    return make_table("cat_parent", g=[["u", "v"][i % 2] for i in range(400)],
                      x=list(gen.normal(size=400)))


def test_single_full_strategy(table):
    catalog = build_catalog(table, [UniformSampler(tau=1.0)], seed=9)
    assert len(catalog) == 1
    handle = catalog.handles[0]
    assert handle.row_count == table.row_count
    assert handle.effective_sr == 1.0


def test_same_params_different_names_differ(table):
    catalog = build_catalog(
        table,
        [UniformSampler(tau=0.3, name="Uni@30%#a"), UniformSampler(tau=0.3, name="Uni@30%#b")],
        seed=9,
    )
    a, b = catalog.handles
    assert a.sample_id != b.sample_id
    assert not np.array_equal(a.row_indices, b.row_indices)


def test_duplicate_sample_id_rejected(table):
    with pytest.raises(DuplicateSampleId):
        build_catalog(table, [UniformSampler(tau=0.3), UniformSampler(tau=0.3)], seed=9)


def test_effective_sr_matches_exact_division(table):
    catalog = build_catalog(
        table, [UniformSampler(tau=0.2), SystematicSampler(k=10)], seed=1
    )
    for handle in catalog.handles:
        assert handle.effective_sr == handle.row_count / table.row_count


def test_catalog_round_trip(tmp_path, table):
    catalog = build_catalog(
        table, [UniformSampler(tau=0.25), SystematicSampler(k=13)], seed=5,
        out_dir=tmp_path / "cat",
    )
    manifest = json.loads((tmp_path / "cat" / "manifest.json").read_text())
    assert manifest["parent"]["content_hash"] == table.content_hash()
    assert [s["sample_id"] for s in manifest["samples"]] == catalog.sample_ids

    loaded = load_catalog(tmp_path / "cat", table)
    assert loaded.sample_ids == catalog.sample_ids
    for a, b in zip(loaded.handles, catalog.handles):
        assert np.array_equal(a.row_indices, b.row_indices)
        assert a.effective_sr == b.effective_sr


def test_catalog_rejects_wrong_table(tmp_path, table):
    build_catalog(table, [UniformSampler(tau=0.25)], seed=5, out_dir=tmp_path / "cat")
    other = make_table("other", g=["a", "b"], x=[1.0, 2.0])
    with pytest.raises(ValueError):
        load_catalog(tmp_path / "cat", other)


def test_index_file_is_little_endian_int64(tmp_path, table):
    catalog = build_catalog(table, [SystematicSampler(k=20)], seed=3, out_dir=tmp_path / "c")
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    raw = (tmp_path / "c" / manifest["samples"][0]["index_file"]).read_bytes()
    decoded = np.frombuffer(raw, dtype="<i8")
    assert np.array_equal(decoded, catalog.handles[0].row_indices)


def test_manifest_byte_identical_across_rebuilds(tmp_path, table):
    strategies = [UniformSampler(tau=0.2), SystematicSampler(k=10)]
    build_catalog(table, strategies, seed=5, out_dir=tmp_path / "one")
    build_catalog(table, strategies, seed=5, out_dir=tmp_path / "two")
    assert (tmp_path / "one" / "manifest.json").read_bytes() == \
        (tmp_path / "two" / "manifest.json").read_bytes()


def test_by_id_missing(table):
    catalog = build_catalog(table, [UniformSampler(tau=0.5)], seed=2)
    with pytest.raises(MissingSample):
        catalog.by_id("nope")


def test_subset_preserves_order(table):
    catalog = build_catalog(
        table, [UniformSampler(tau=0.2), SystematicSampler(k=10), UniformSampler(tau=0.4)],
        seed=2,
    )
    sub = catalog.subset(lambda h: h.strategy.kind == "uniform")
    assert sub.sample_ids == ["Uni@20%", "Uni@40%"]


def test_draw_sample_determinism_from_seed(table):
    a = draw_sample(table, UniformSampler(tau=0.4), seed=77)
    b = draw_sample(table, UniformSampler(tau=0.4), seed=77)
    c = draw_sample(table, UniformSampler(tau=0.4), seed=78)
    assert np.array_equal(a.row_indices, b.row_indices)
    assert not np.array_equal(a.row_indices, c.row_indices)
