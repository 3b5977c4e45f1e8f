"""Development sample ingestion and design-matrix encoding.

A development sample is held as a :class:`Dataset`: a numeric design matrix
with a leading intercept column, a 0/1 outcome vector and the column schema
used to build it.  Categorical predictors are dummy coded with the first
listed level as reference.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

KINDS = ("continuous", "binary", "categorical")
ROLES = ("predictor", "outcome")


class DataError(ValueError):
    """Raised when a development sample fails validation."""


@dataclass(frozen=True)
class ColumnSpec:
    """Schema entry for one CSV column.

    ``levels`` is the ordered level list for categorical columns.  For binary
    columns (predictors or the outcome) it holds the two raw labels mapped to
    0 and 1, in that order, and defaults to ``("0", "1")``.
    """

    name: str
    kind: str = "continuous"
    role: str = "predictor"
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise DataError(f"column {self.name!r}: unknown role {self.role!r}")
        levels = tuple(str(v) for v in self.levels)
        if self.kind == "binary" and not levels:
            levels = ("0", "1")
        if self.role == "outcome" and self.kind != "binary":
            raise DataError(f"outcome column {self.name!r} must be binary")
        if self.kind == "categorical" and not levels:
            raise DataError(f"categorical column {self.name!r} needs levels")
        if self.kind == "binary" and len(levels) != 2:
            raise DataError(f"binary column {self.name!r} needs exactly 2 labels")
        if len(set(levels)) != len(levels):
            raise DataError(f"column {self.name!r} has duplicate levels")
        object.__setattr__(self, "levels", levels)


@dataclass(frozen=True)
class Dataset:
    """An encoded development sample ``d = (x, y)``.

    ``x`` includes the intercept column; ``encoding_map`` maps each
    categorical column name to ``{level: design column index or None}``
    (``None`` for the reference level).
    """

    x: np.ndarray
    y: np.ndarray
    specs: tuple[ColumnSpec, ...] = ()
    column_names: tuple[str, ...] = ()
    encoding_map: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DataError(f"shape mismatch: x {x.shape}, y {y.shape}")
        n, p = x.shape
        if not np.all(np.isfinite(x)):
            raise DataError("design matrix has non-finite entries")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("outcome must be 0/1")
        if y.min() == y.max():
            raise DataError("outcome must contain both classes")
        if p < 2:
            raise DataError("need an intercept and at least one predictor")
        if n <= p:
            raise DataError(f"need more rows than design columns (n={n}, p={p})")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not self.column_names:
            names = ("intercept",) + tuple(f"x{j}" for j in range(1, p))
            object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def design_width(schema: Sequence[ColumnSpec]) -> int:
    """Number of design columns the schema encodes to, intercept included."""
    p = 1
    for spec in schema:
        if spec.role != "predictor":
            continue
        p += len(spec.levels) - 1 if spec.kind == "categorical" else 1
    return p


def _check_schema(schema: Sequence[ColumnSpec]) -> ColumnSpec:
    outcomes = [s for s in schema if s.role == "outcome"]
    if len(outcomes) != 1:
        raise DataError(f"schema needs exactly one outcome column, got {len(outcomes)}")
    names = [s.name for s in schema]
    if len(set(names)) != len(names):
        raise DataError("schema has duplicate column names")
    return outcomes[0]


def encode(rows: Sequence[dict], schema: Sequence[ColumnSpec], first_line: int = 2) -> Dataset:
    """Encode raw string records into a :class:`Dataset`.

    ``first_line`` is the file line number of ``rows[0]`` and is only used in
    error messages.
    """
    outcome = _check_schema(schema)
    predictors = [s for s in schema if s.role == "predictor"]

    names = ["intercept"]
    encoding_map = {}
    for spec in predictors:
        if spec.kind == "categorical":
            cols = {spec.levels[0]: None}
            for level in spec.levels[1:]:
                cols[level] = len(names)
                names.append(f"{spec.name}[{level}]")
            encoding_map[spec.name] = cols
        else:
            names.append(spec.name)

    n = len(rows)
    x = np.zeros((n, len(names)))
    x[:, 0] = 1.0
    y = np.zeros(n)
    for i, row in enumerate(rows):
        line = first_line + i
        for spec in schema:
            raw = row.get(spec.name)
            raw = "" if raw is None else raw.strip()
            if raw == "":
                raise DataError(f"missing value at line {line}, column {spec.name!r}")
            if spec.role == "outcome":
                if raw not in spec.levels:
                    raise DataError(
                        f"outcome not binary: value {raw!r} at line {line} "
                        f"is not one of {list(spec.levels)}"
                    )
                y[i] = spec.levels.index(raw)
                continue
            if spec.kind == "continuous":
                try:
                    x[i, names.index(spec.name)] = float(raw)
                except ValueError:
                    raise DataError(
                        f"non-numeric value {raw!r} at line {line}, column {spec.name!r}"
                    ) from None
            elif spec.kind == "binary":
                if raw not in spec.levels:
                    raise DataError(
                        f"unknown level {raw!r} at line {line}, column {spec.name!r}"
                    )
                x[i, names.index(spec.name)] = spec.levels.index(raw)
            else:
                cols = encoding_map[spec.name]
                if raw not in cols:
                    raise DataError(
                        f"unknown level {raw!r} at line {line}, column {spec.name!r}"
                    )
                if cols[raw] is not None:
                    x[i, cols[raw]] = 1.0

    if n <= len(names):
        raise DataError(f"need more rows than design columns (n={n}, p={len(names)})")
    return Dataset(x, y, tuple(schema), tuple(names), encoding_map)


def load_csv(path, schema: Sequence[ColumnSpec]) -> Dataset:
    """Read a comma-separated file with a header row and encode it."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [s.name for s in schema if s.name not in header]
        if missing:
            raise DataError(f"{path}: header lacks schema columns {missing}")
        rows = list(reader)
    return encode(rows, schema)


def decode_levels(d: Dataset, column: str) -> list[str]:
    """Recover the raw level label of a categorical column for every row."""
    cols = d.encoding_map[column]
    out = []
    for row in d.x:
        label = next((lv for lv, j in cols.items() if j is not None and row[j] == 1.0), None)
        if label is None:
            label = next(lv for lv, j in cols.items() if j is None)
        out.append(label)
    return out


def empirical_prevalence(d, w) -> float:
    """Weighted outcome prevalence ``sum(w*y) / sum(w)``.

    ``d`` may be a :class:`Dataset` or a bare outcome vector (a weighted
    subview, which is allowed to hold a single class).
    """
    y = d.y if isinstance(d, Dataset) else np.asarray(d, dtype=float)
    w = np.asarray(getattr(w, "w", w), dtype=float)
    if w.shape != y.shape:
        raise DataError(f"weight length {w.shape} does not match n={y.shape[0]}")
    return float(np.dot(w, y) / w.sum())
