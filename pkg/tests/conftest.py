import numpy as np
import pytest

from edapilot.tabular import Column, ColumnType, Table, compute_stats


def make_table(name="fixture", **cols) -> Table:
    """Build a table from kwargs: lists of str -> categorical, numbers -> real."""
    columns = []
    n = None
    for cname, values in cols.items():
        if all(isinstance(v, str) or v is None for v in values):
            arr = np.array(values, dtype=object)
            columns.append(Column(cname, ColumnType.CATEGORICAL, arr))
        else:
            arr = np.array([np.nan if v is None else float(v) for v in values])
            ctype = (ColumnType.INTEGER
                     if all(v is None or float(v).is_integer() for v in values)
                     else ColumnType.REAL)
            columns.append(Column(cname, ctype, arr))
        n = len(values)
    return Table(name=name, columns=tuple(columns), row_count=n)


@pytest.fixture
def months_table():
    months = ["JAN", "FEB", "MAR", "APR", "MAY", "JUN",
              "JUL", "AUG", "SEP", "OCT", "NOV", "DEC"]
    return make_table("months", month=months, delay=list(range(12)))


@pytest.fixture
def flights6():
    """Six-row fixture used by hand-computed filter/group oracles."""
    return make_table(
        "flights6",
        carrier=["AA", "AA", "DL", "DL", "UA", "UA"],
        delay=[20.0, 10.0, 30.0, 16.0, 5.0, 40.0],
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def wide_table():
    gen = np.random.default_rng(99)
    n = 1000
    return make_table(
        "wide",
        cat=[["A", "B", "C", "D"][i % 4] for i in range(n)],
        x=list(gen.normal(size=n)),
        y=list(gen.exponential(size=n)),
    )


@pytest.fixture(scope="session")
def wide_stats(wide_table):
    return compute_stats(wide_table)
