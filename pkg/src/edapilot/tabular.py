"""Columnar in-memory table: CSV ingestion, typed columns, per-column stats.

Numeric columns are stored as float64 arrays with NaN marking nulls;
categorical columns as object arrays of str with None marking nulls.
Tables are immutable after load and safe to share across threads.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EmptyFile, MalformedCsv, TableTooLarge, UnknownColumn

DEFAULT_MAX_ROWS = 10_000_000

NULL_LABEL = "∅"  # rendered stand-in for missing values


class ColumnType(Enum):
    INTEGER = "integer"
    REAL = "real"
    CATEGORICAL = "categorical"

    @property
    def is_numeric(self) -> bool:
        return self is not ColumnType.CATEGORICAL


@dataclass(frozen=True)
class Column:
    name: str
    ctype: ColumnType
    values: np.ndarray  # float64 (numeric) or object-of-str (categorical)

    def null_mask(self) -> np.ndarray:
        if self.ctype.is_numeric:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def category_codes(self) -> tuple[np.ndarray, np.ndarray]:
        """(codes, sorted categories); code -1 marks null. Memoized per column."""
        cached = self.__dict__.get("_codes")
        if cached is None:
            strs = np.array(["" if v is None else v for v in self.values], dtype=str)
            uniq, codes = np.unique(strs, return_inverse=True)
            codes = codes.astype(np.int64)
            if len(uniq) and uniq[0] == "":
                null_present = np.array([v is None for v in self.values], dtype=bool)
                codes = np.where(null_present, -1, codes - 1)
                # "" cells that were genuine empty strings cannot occur: CSV "" is null
                uniq = uniq[1:]
            cached = (codes, uniq)
            object.__setattr__(self, "_codes", cached)
        return cached


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[Column, ...]
    row_count: int

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in table {self.name!r}")
        for c in self.columns:
            if len(c.values) != self.row_count:
                raise ValueError(
                    f"column {c.name!r} has {len(c.values)} values, expected {self.row_count}"
                )

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise UnknownColumn(f"no column {name!r} in table {self.name!r}")

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise UnknownColumn(f"no column {name!r} in table {self.name!r}")

    def render_cell(self, col: Column, row: int) -> str:
        return render_value(col, col.values[row])

    def render_row(self, row: int) -> tuple[str, ...]:
        return tuple(self.render_cell(c, row) for c in self.columns)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(",".join(f"{c.name}:{c.ctype.value}" for c in self.columns).encode())
        for c in self.columns:
            h.update(b"\x00")
            if c.ctype.is_numeric:
                h.update(c.values.astype("<f8").tobytes())
            else:
                for v in c.values:
                    h.update(b"\x01" if v is None else v.encode())
                    h.update(b"\x02")
        return h.hexdigest()


def render_value(col: Column, value) -> str:
    """Stable textual rendering of a single cell."""
    if col.ctype is ColumnType.CATEGORICAL:
        return NULL_LABEL if value is None else str(value)
    if isinstance(value, float) and math.isnan(value):
        return NULL_LABEL
    if col.ctype is ColumnType.INTEGER:
        return str(int(value))
    return repr(float(value))


@dataclass(frozen=True)
class ColumnStats:
    column: str
    distinct_count: int
    min: float | None = None
    max: float | None = None
    mean: float | None = None
    stddev: float | None = None
    category_frequencies: dict[str, int] = field(default_factory=dict)

    @property
    def value_range(self) -> float:
        if self.min is None or self.max is None:
            return 0.0
        return self.max - self.min


def _parse_int(cell: str) -> int | None:
    try:
        return int(cell)
    except ValueError:
        return None


def _parse_float(cell: str) -> float | None:
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def infer_column_type(cells: list[str]) -> ColumnType:
    """Integer -> Real -> Categorical; one non-conforming non-empty cell demotes."""
    ctype = ColumnType.INTEGER
    for cell in cells:
        if cell == "":
            continue
        if ctype is ColumnType.INTEGER and _parse_int(cell) is None:
            ctype = ColumnType.REAL
        if ctype is ColumnType.REAL and _parse_float(cell) is None:
            return ColumnType.CATEGORICAL
    return ctype


def _build_column(name: str, cells: list[str], ctype: ColumnType) -> Column:
    if ctype.is_numeric:
        out = np.empty(len(cells), dtype=np.float64)
        for i, cell in enumerate(cells):
            if cell == "":
                out[i] = np.nan
                continue
            parsed = _parse_int(cell) if ctype is ColumnType.INTEGER else _parse_float(cell)
            if parsed is None:
                raise MalformedCsv(
                    f"column {name!r}: cell {cell!r} does not parse as {ctype.value}"
                )
            out[i] = float(parsed)
        return Column(name, ctype, out)
    vals = np.empty(len(cells), dtype=object)
    for i, cell in enumerate(cells):
        vals[i] = None if cell == "" else cell
    return Column(name, ctype, vals)


def load_csv(
    path: str | os.PathLike,
    schema_hint: dict[str, ColumnType] | None = None,
    max_rows: int = DEFAULT_MAX_ROWS,
    name: str | None = None,
) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        raw_rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise MalformedCsv(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            raw_rows.append(row)
    if len(raw_rows) > max_rows:
        raise TableTooLarge(f"{path}: {len(raw_rows)} rows exceeds limit {max_rows}")

    schema_hint = schema_hint or {}
    columns = []
    for j, col_name in enumerate(header):
        cells = [r[j] for r in raw_rows]
        ctype = schema_hint.get(col_name) or infer_column_type(cells)
        columns.append(_build_column(col_name, cells, ctype))
    table_name = name if name is not None else os.path.splitext(os.path.basename(path))[0]
    return Table(name=table_name, columns=tuple(columns), row_count=len(raw_rows))


def write_csv(table: Table, path: str | os.PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        for i in range(table.row_count):
            row = []
            for c in table.columns:
                v = c.values[i]
                if c.ctype is ColumnType.CATEGORICAL:
                    row.append("" if v is None else v)
                elif math.isnan(v):
                    row.append("")
                elif c.ctype is ColumnType.INTEGER:
                    row.append(str(int(v)))
                else:
                    row.append(repr(float(v)))
            writer.writerow(row)


def compute_column_stats(col: Column, row_count: int) -> ColumnStats:
    if col.ctype.is_numeric:
        present = col.values[~np.isnan(col.values)]
        if present.size == 0:
            return ColumnStats(column=col.name, distinct_count=0)
        return ColumnStats(
            column=col.name,
            distinct_count=int(np.unique(present).size),
            min=float(present.min()),
            max=float(present.max()),
            mean=float(present.mean()),
            stddev=float(present.std(ddof=0)),
        )
    freqs: dict[str, int] = {}
    for v in col.values:
        if v is None:
            continue
        freqs[v] = freqs.get(v, 0) + 1
    return ColumnStats(
        column=col.name,
        distinct_count=len(freqs),
        category_frequencies=dict(sorted(freqs.items())),
    )


def compute_stats(table: Table) -> dict[str, ColumnStats]:
    return {c.name: compute_column_stats(c, table.row_count) for c in table.columns}


def take_rows(table: Table, indices: np.ndarray, name: str | None = None) -> Table:
    """Materialize a physical copy of the given rows (used for view/copy checks)."""
    cols = tuple(Column(c.name, c.ctype, c.values[indices]) for c in table.columns)
    return Table(name=name or f"{table.name}[subset]", columns=cols, row_count=len(indices))
