"""Contingency tables, probability vectors over table cells, and margins.

Cells are always addressed in row-major order over ``axis_sizes``; a flat
position ``t`` and a :class:`CellIndex` are interchangeable through
``numpy.ravel_multi_index``.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, TableError

FIXTURES = ("eye_hair.csv", "children_income.csv", "recruits.csv")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CellIndex:
    """Position of a cell, one 0-based coordinate per table axis."""

    coordinates: tuple[int, ...]

    def validate(self, axis_sizes: Sequence[int]) -> "CellIndex":
        if len(self.coordinates) != len(axis_sizes):
            raise DimensionMismatchError(
                f"cell index has {len(self.coordinates)} coordinates, table has {len(axis_sizes)} axes"
            )
        for i, (c, s) in enumerate(zip(self.coordinates, axis_sizes)):
            if not 0 <= c < s:
                raise IndexError(f"coordinate {c} out of range for axis {i} of size {s}")
        return self

    def flat(self, axis_sizes: Sequence[int]) -> int:
        self.validate(axis_sizes)
        return int(np.ravel_multi_index(self.coordinates, tuple(axis_sizes)))


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Observed (possibly fractional) cell counts over a multiway index.

    ``counts`` is stored with shape ``axis_sizes``; ``counts.ravel()`` gives
    the row-major cell order.  ``levels`` holds the level labels of each axis
    and is only used for display and serialization.
    """

    axis_names: tuple[str, ...]
    axis_sizes: tuple[int, ...]
    counts: np.ndarray
    n: float
    levels: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.axis_sizes)
        if not sizes or any(s <= 0 for s in sizes):
            raise TableError(f"axis sizes must be positive integers, got {self.axis_sizes}")
        if len(self.axis_names) != len(sizes):
            raise TableError("one axis name is required per axis")
        counts = np.asarray(self.counts, dtype=float)
        if counts.size != math.prod(sizes):
            raise TableError(f"{counts.size} counts given for {math.prod(sizes)} cells")
        counts = counts.reshape(sizes)
        if not np.all(np.isfinite(counts)):
            raise TableError("counts must be finite")
        if np.any(counts < 0):
            bad = np.argwhere(counts < 0)[0]
            raise TableError(f"negative count at cell {tuple(int(b) for b in bad)}")
        total = float(counts.sum())
        if total <= 0:
            raise TableError("table total n must be positive")
        if float(self.n) != total:
            raise TableError(f"stored n={self.n} differs from the sum of counts {total}")
        levels = tuple(tuple(str(x) for x in lv) for lv in self.levels)
        if not levels:
            levels = tuple(tuple(str(i) for i in range(s)) for s in sizes)
        if tuple(len(lv) for lv in levels) != sizes:
            raise TableError("level labels do not match axis sizes")
        object.__setattr__(self, "axis_names", tuple(str(a) for a in self.axis_names))
        object.__setattr__(self, "axis_sizes", sizes)
        object.__setattr__(self, "counts", _frozen(counts))
        object.__setattr__(self, "n", total)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_array(cls, counts, axis_names=None, levels=()) -> "ContingencyTable":
        counts = np.asarray(counts, dtype=float)
        if counts.ndim == 0:
            counts = counts.reshape(1)
        if axis_names is None:
            axis_names = tuple(f"axis{i}" for i in range(counts.ndim))
        return cls(tuple(axis_names), counts.shape, counts, float(counts.sum()), levels)

    @property
    def ndim(self) -> int:
        return len(self.axis_sizes)

    def __getitem__(self, index) -> float:
        if not isinstance(index, CellIndex):
            index = CellIndex(tuple(index) if isinstance(index, tuple) else (index,))
        index.validate(self.axis_sizes)
        return float(self.counts[index.coordinates])

    def __eq__(self, other):
        if not isinstance(other, ContingencyTable):
            return NotImplemented
        return (
            self.axis_names == other.axis_names
            and self.axis_sizes == other.axis_sizes
            and self.levels == other.levels
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ProbVector:
    """A point on the probability simplex over the cells of a table.

    Entries are normalized on construction, so any nonnegative array with a
    positive total is accepted.
    """

    probs: np.ndarray
    dims: tuple[int, ...] = field(default=())

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        dims = tuple(int(s) for s in self.dims) if self.dims else p.shape
        if p.size != math.prod(dims):
            raise DimensionMismatchError(f"{p.size} entries do not fit dims {dims}")
        p = p.reshape(dims)
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and nonnegative")
        total = p.sum()
        if total <= 0:
            raise ValueError("probabilities must have positive total mass")
        object.__setattr__(self, "probs", _frozen(p / total))
        object.__setattr__(self, "dims", dims)

    @property
    def flat(self) -> np.ndarray:
        return self.probs.ravel()

    def __len__(self):
        return self.probs.size

    def __eq__(self, other):
        if not isinstance(other, ProbVector):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.probs, other.probs)

    __hash__ = None


def as_array(p, dims=None) -> np.ndarray:
    """Return the cell array of ``p`` (a ProbVector or array-like)."""
    if isinstance(p, ProbVector):
        a = p.probs
    elif isinstance(p, ContingencyTable):
        a = p.counts / p.n
    else:
        a = np.asarray(p, dtype=float)
    if dims is not None and a.shape != tuple(dims):
        if a.size != math.prod(dims):
            raise DimensionMismatchError(f"shape {a.shape} does not conform to dims {tuple(dims)}")
        a = a.reshape(dims)
    return a


def check_dims(*vectors) -> None:
    dims = {v.dims for v in vectors if isinstance(v, ProbVector)}
    dims |= {np.shape(v) for v in vectors if not isinstance(v, ProbVector)}
    if len(dims) > 1:
        raise DimensionMismatchError(f"mismatched dims: {sorted(dims)}")


def to_proportions(table: ContingencyTable) -> ProbVector:
    return ProbVector(table.counts / table.n, table.axis_sizes)


def margin(p: ProbVector, axes: Iterable[int]) -> ProbVector:
    """Sum ``p`` over every axis not in ``axes``; retained axes keep their order."""
    keep = sorted(set(int(a) for a in axes))
    nd = len(p.dims)
    if not keep:
        raise ValueError("margin requires at least one retained axis")
    if keep[0] < 0 or keep[-1] >= nd:
        raise ValueError(f"axes {keep} out of range for a {nd}-way table")
    if len(keep) == nd:
        return p
    drop = tuple(a for a in range(nd) if a not in keep)
    return ProbVector(p.probs.sum(axis=drop), tuple(p.dims[a] for a in keep))


# ------------------------------------------------------------------ #
# CSV ingestion
# ------------------------------------------------------------------ #


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        raw = bytes(source)
    elif isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
        if isinstance(raw, str):
            return raw
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise TableError(f"input is not valid UTF-8: {exc}") from None


def _parse_count(text, row, column) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise TableError(f"non-numeric count {text!r}", row, column) from None
    if not math.isfinite(value):
        raise TableError(f"non-finite count {text!r}", row, column)
    if value < 0:
        raise TableError(f"negative count {text!r}", row, column)
    return value


def _rows(text):
    rows = [r for r in csv.reader(io.StringIO(text))]
    # blank lines anywhere are tolerated; their position still counts for error locations
    return [(i + 1, r) for i, r in enumerate(rows) if any(cell.strip() for cell in r)]


def _load_grid(text) -> ContingencyTable:
    rows = _rows(text)
    if not rows:
        raise TableError("empty grid")
    (_, header), body = rows[0], rows[1:]
    if len(header) < 2:
        raise TableError("grid header needs a corner cell and at least one column label", 1)
    if not body:
        raise TableError("grid has no data rows")
    corner = header[0].strip()
    names = [s.strip() for s in corner.split("/", 1)] if "/" in corner else [corner or "rows", "columns"]
    col_labels = [h.strip() for h in header[1:]]
    counts, row_labels = [], []
    for lineno, r in body:
        if len(r) != len(header):
            raise TableError(f"ragged grid: expected {len(header)} fields, found {len(r)}", lineno)
        row_labels.append(r[0].strip())
        counts.append([_parse_count(x, lineno, j + 2) for j, x in enumerate(r[1:])])
    counts = np.array(counts, dtype=float)
    return ContingencyTable(
        tuple(names), counts.shape, counts, float(counts.sum()), (tuple(row_labels), tuple(col_labels))
    )


def _load_long(text) -> ContingencyTable:
    rows = _rows(text)
    if not rows:
        raise TableError("empty table")
    (_, header), body = rows[0], rows[1:]
    header = [h.strip() for h in header]
    if len(header) < 2 or header[-1].lower() != "count":
        raise TableError("long format needs axis columns followed by a final 'count' column", 1)
    axes = header[:-1]
    levels: list[dict[str, int]] = [{} for _ in axes]
    seen: dict[tuple[int, ...], int] = {}
    values = []
    for lineno, r in body:
        if len(r) != len(header):
            raise TableError(f"expected {len(header)} fields, found {len(r)}", lineno)
        key = []
        for a, label in enumerate(r[:-1]):
            key.append(levels[a].setdefault(label.strip(), len(levels[a])))
        key = tuple(key)
        if key in seen:
            raise TableError(f"duplicate cell {tuple(x.strip() for x in r[:-1])} (first seen on row {seen[key]})", lineno)
        seen[key] = lineno
        values.append((key, _parse_count(r[-1], lineno, len(header))))
    sizes = tuple(len(lv) for lv in levels)
    counts = np.full(sizes, np.nan)
    for key, v in values:
        counts[key] = v
    if np.isnan(counts).any():
        missing = tuple(int(i) for i in np.argwhere(np.isnan(counts))[0])
        labels = tuple(list(levels[a])[i] for a, i in enumerate(missing))
        raise TableError(f"missing cell {labels}")
    return ContingencyTable(
        tuple(axes), sizes, counts, float(counts.sum()), tuple(tuple(lv) for lv in levels)
    )


def load_table(source, format: str | None = None) -> ContingencyTable:
    """Parse a contingency table from a path, bytes, or a readable stream.

    ``format`` is ``"grid2d"`` or ``"long"``; when omitted it is inferred
    from the header (a final ``count`` column means long format).
    """
    text = _read_text(source)
    if format is None:
        first = next(iter(csv.reader(io.StringIO(text))), [])
        format = "long" if first and first[-1].strip().lower() == "count" else "grid2d"
    if format == "grid2d":
        return _load_grid(text)
    if format == "long":
        return _load_long(text)
    raise ValueError(f"unknown table format {format!r}")


def _fmt_count(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def dump_table(table: ContingencyTable, format: str = "long") -> str:
    """Serialize ``table`` so that :func:`load_table` reads it back unchanged."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    if format == "grid2d":
        if table.ndim != 2:
            raise TableError("grid2d output requires a two-way table")
        w.writerow([f"{table.axis_names[0]}/{table.axis_names[1]}", *table.levels[1]])
        for label, row in zip(table.levels[0], table.counts):
            w.writerow([label, *(_fmt_count(x) for x in row)])
    elif format == "long":
        w.writerow([*table.axis_names, "count"])
        for idx in np.ndindex(*table.axis_sizes):
            w.writerow([*(table.levels[a][i] for a, i in enumerate(idx)), _fmt_count(table.counts[idx])])
    else:
        raise ValueError(f"unknown table format {format!r}")
    return out.getvalue()


def fixture_path(name: str):
    """Path of a bundled example table (``eye_hair.csv`` etc.)."""
    return resources.files("ktube") / "data" / name


def load_fixture(name: str) -> ContingencyTable:
    if not name.endswith(".csv"):
        name += ".csv"
    with fixture_path(name).open("rb") as fh:
        return load_table(fh)
