import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edapilot.errors import EmptyFile, MalformedCsv, TableTooLarge
from edapilot.tabular import (
    ColumnType,
    compute_stats,
    infer_column_type,
    load_csv,
    write_csv,
)

from conftest import make_table


def write(tmp_path, text, name="t.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_basic_fixture(tmp_path):
    path = write(tmp_path, "carrier,delay\nAA,5\nDL,15.5\nAA,7\n")
    table = load_csv(path)
    assert table.row_count == 3
    assert table.column("carrier").ctype is ColumnType.CATEGORICAL
    assert table.column("delay").ctype is ColumnType.REAL


def test_header_only_file(tmp_path):
    table = load_csv(write(tmp_path, "a,b\n"))
    assert table.row_count == 0
    stats = compute_stats(table)
    assert stats["a"].distinct_count == 0 and stats["b"].distinct_count == 0


def test_integer_parse_failure_falls_back_to_categorical(tmp_path):
    # oracle: "1" int, "2" int, "x" fails int and float -> categorical
    assert infer_column_type(["1", "2", "x"]) is ColumnType.CATEGORICAL
    table = load_csv(write(tmp_path, "v\n1\n2\nx\n"))
    assert table.column("v").ctype is ColumnType.CATEGORICAL


def test_integer_then_real_demotion(tmp_path):
    assert infer_column_type(["1", "2.5", "3"]) is ColumnType.REAL
    assert infer_column_type(["1", "", "3"]) is ColumnType.INTEGER


def test_empty_file_raises(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    with pytest.raises(EmptyFile):
        load_csv(path)


def test_ragged_row_raises(tmp_path):
    with pytest.raises(MalformedCsv):
        load_csv(write(tmp_path, "a,b\n1,2\n3\n"))


def test_hinted_type_mismatch_raises(tmp_path):
    path = write(tmp_path, "v\nhello\n")
    with pytest.raises(MalformedCsv):
        load_csv(path, schema_hint={"v": ColumnType.REAL})


def test_max_rows_limit(tmp_path):
    path = write(tmp_path, "v\n" + "\n".join("1" for _ in range(11)) + "\n")
    with pytest.raises(TableTooLarge):
        load_csv(path, max_rows=10)


def test_stats_hand_arithmetic():
    table = make_table("s", v=[1, 1, 2])
    st_ = compute_stats(table)["v"]
    assert st_.distinct_count == 2
    assert st_.mean == pytest.approx(4 / 3)


def test_stats_all_null_column(tmp_path):
    table = load_csv(write(tmp_path, "v,w\n,1\n,2\n"))
    st_ = compute_stats(table)["v"]
    assert st_.distinct_count == 0
    assert st_.min is None and st_.mean is None


def test_stats_categorical_frequencies():
    # 5 categories x 10 rows, counted independently by a dict-based oracle
    values = [f"c{i}" for i in range(5) for _ in range(10)]
    oracle: dict[str, int] = {}
    for v in values:
        oracle[v] = oracle.get(v, 0) + 1
    table = make_table("cat50", v=values)
    st_ = compute_stats(table)["v"]
    assert st_.category_frequencies == oracle
    assert st_.distinct_count == 5


def test_frequencies_sum_to_rows_minus_nulls():
    table = make_table("withnull", v=["a", "b", None, "a"])
    st_ = compute_stats(table)["v"]
    assert sum(st_.category_frequencies.values()) == 3


def test_stats_invariant_under_row_order(wide_table):
    forward = compute_stats(wide_table)
    reversed_table = make_table(
        "rev",
        cat=list(wide_table.column("cat").values[::-1]),
        x=list(wide_table.column("x").values[::-1]),
        y=list(wide_table.column("y").values[::-1]),
    )
    backward = compute_stats(reversed_table)
    for name in ("cat", "x", "y"):
        a, b = forward[name], backward[name]
        assert a.distinct_count == b.distinct_count
        assert a.category_frequencies == b.category_frequencies
        if a.mean is not None:
            assert a.mean == pytest.approx(b.mean)
            assert a.stddev == pytest.approx(b.stddev)


csv_cell = st.one_of(
    st.integers(-1000, 1000).map(str),
    st.floats(-1e6, 1e6, allow_nan=False).map(lambda v: repr(v)),
    st.sampled_from(["alpha", "beta", "gamma", ""]),
)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(csv_cell, csv_cell), min_size=1, max_size=30))
def test_csv_round_trip(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("roundtrip")
    import csv as csv_mod

    path = tmp / "in.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv_mod.writer(fh)
        writer.writerow(["a", "b"])
        writer.writerows(rows)
    table = load_csv(path)
    out = tmp / "out.csv"
    write_csv(table, out)
    reloaded = load_csv(out, schema_hint={c.name: c.ctype for c in table.columns})
    assert reloaded.row_count == table.row_count
    assert reloaded.column_names == table.column_names
    for col, rcol in zip(table.columns, reloaded.columns):
        if col.ctype.is_numeric:
            assert np.array_equal(col.values, rcol.values, equal_nan=True)
        else:
            assert list(col.values) == list(rcol.values)
    assert reloaded.content_hash() == table.content_hash()


def test_content_hash_changes_with_values():
    a = make_table("a", v=[1, 2, 3])
    b = make_table("a", v=[1, 2, 4])
    assert a.content_hash() != b.content_hash()


def test_render_row():
    table = make_table("r", c=["x", None], v=[1.5, None])
    assert table.render_row(0) == ("x", "1.5")
    assert table.render_row(1) == ("∅", "∅")
