"""Tabular datasets: the immutable :class:`Frame` plus loading, generation and slicing."""

from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "Role",
    "Column",
    "Frame",
    "SyntheticConfig",
    "load_csv",
    "write_csv",
    "infer_schema",
    "generate_synthetic",
    "synthetic_signal",
    "noiseless_labels",
    "split",
    "as_categorical",
    "one_hot_encode",
    "filter_segment",
    "parse_predicate",
    "load_uci",
    "UCI_FEATURES",
    "UCI_PAY",
]


class Role(str, Enum):
    NUMERIC = "numeric"
    CATEGORICAL = "categorical"
    TARGET = "target"


# Schema-only role: the column is read from the header but dropped.
SKIP = "skip"


@dataclass(frozen=True)
class Column:
    name: str
    role: Role
    levels: tuple[str, ...] = ()


def _freeze(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


def format_level(value: float) -> str:
    """Render a numeric level the way it would appear in a CSV cell."""
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


class Frame:
    """Columnar table with declared column roles.

    Numeric and target columns hold float64 values; categorical columns hold
    int64 codes into ``Column.levels``. Frames never change after
    construction, so every transformation returns a new one.
    """

    def __init__(self, columns: Sequence[Column], data: Mapping[str, np.ndarray]):
        columns = tuple(columns)
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate column names in {names}")
        if sum(c.role is Role.TARGET for c in columns) > 1:
            raise DataError("at most one target column is allowed")
        lengths = {len(data[n]) for n in names}
        if len(lengths) > 1:
            raise DataError(f"columns have different lengths: {sorted(lengths)}")
        arrays = {}
        for col in columns:
            values = np.asarray(data[col.name])
            if col.role is Role.CATEGORICAL:
                values = values.astype(np.int64)
                if values.size and (values.min() < 0 or values.max() >= len(col.levels)):
                    raise DataError(f"categorical codes of {col.name!r} out of range")
            else:
                values = values.astype(np.float64)
                if col.role is Role.TARGET and not np.isin(values, (0.0, 1.0)).all():
                    raise DataError(f"target {col.name!r} must contain only 0 and 1")
            arrays[col.name] = _freeze(values)
        self._columns = columns
        self._index = {c.name: c for c in columns}
        self._data = arrays
        self._n_rows = lengths.pop() if lengths else 0

    # -- shape and schema -------------------------------------------------
    @property
    def columns(self) -> tuple[Column, ...]:
        return self._columns

    @property
    def names(self) -> list[str]:
        return [c.name for c in self._columns]

    @property
    def n_rows(self) -> int:
        return self._n_rows

    @property
    def n_cols(self) -> int:
        return len(self._columns)

    def __len__(self) -> int:
        return self._n_rows

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __repr__(self) -> str:
        return f"Frame(n_rows={self.n_rows}, columns={self.names})"

    def column(self, name: str) -> Column:
        try:
            return self._index[name]
        except KeyError:
            raise DataError(f"unknown column {name!r}") from None

    @property
    def target_name(self) -> str | None:
        for col in self._columns:
            if col.role is Role.TARGET:
                return col.name
        return None

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self._columns if c.role is not Role.TARGET]

    @property
    def target(self) -> np.ndarray:
        name = self.target_name
        if name is None:
            raise DataError("frame has no target column")
        return self._data[name]

    # -- values -----------------------------------------------------------
    def values(self, name: str) -> np.ndarray:
        """Raw stored values: floats, or integer codes for categoricals."""
        self.column(name)
        return self._data[name]

    def numeric_values(self, name: str) -> np.ndarray:
        """Values as floats; categorical codes are mapped back to their level values."""
        col = self.column(name)
        if col.role is not Role.CATEGORICAL:
            return self._data[name]
        try:
            lookup = np.array([float(level) for level in col.levels])
        except ValueError:
            raise DataError(f"categorical column {name!r} has non-numeric levels") from None
        return lookup[self._data[name]] if len(lookup) else np.zeros(0)

    def decoded(self, name: str) -> list[str]:
        col = self.column(name)
        if col.role is Role.CATEGORICAL:
            return [col.levels[c] for c in self._data[name]]
        return [format_level(v) for v in self._data[name]]

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        """Stack columns into an ``n_rows x len(names)`` float matrix (features by default)."""
        names = self.feature_names if names is None else list(names)
        if not names:
            return np.zeros((self.n_rows, 0))
        return np.column_stack([self.numeric_values(n) for n in names]).astype(np.float64)

    def rows(self) -> list[tuple]:
        """Row tuples of stored values, handy for partition checks."""
        cols = [self._data[n].tolist() for n in self.names]
        return list(zip(*cols))

    # -- derivation -------------------------------------------------------
    def take(self, indices: Sequence[int] | np.ndarray) -> "Frame":
        idx = np.asarray(indices, dtype=np.int64)
        return Frame(self._columns, {n: v[idx] for n, v in self._data.items()})

    def mask(self, keep: np.ndarray) -> "Frame":
        return self.take(np.flatnonzero(np.asarray(keep, dtype=bool)))

    def select(self, names: Sequence[str]) -> "Frame":
        cols = [self.column(n) for n in names]
        return Frame(cols, {n: self._data[n] for n in names})

    def drop(self, names: Iterable[str]) -> "Frame":
        dropped = set(names)
        for n in dropped:
            self.column(n)
        return self.select([n for n in self.names if n not in dropped])

    def with_values(self, name: str, values: np.ndarray) -> "Frame":
        """Replace one column's values, keeping its role and levels."""
        self.column(name)
        data = dict(self._data)
        data[name] = np.broadcast_to(np.asarray(values), (self.n_rows,))
        return Frame(self._columns, data)

    def equals(self, other: "Frame") -> bool:
        if self._columns != other._columns:
            return False
        return all(np.array_equal(self._data[n], other._data[n]) for n in self.names)


# -- CSV I/O ----------------------------------------------------------------

def _parse_float(cell: str, row: int, name: str) -> float:
    text = cell.strip()
    if text == "":
        raise DataError(f"row {row}, column {name!r}: missing value")
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {name!r}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {name!r}: non-finite value {cell!r}")
    return value


def infer_schema(
    path: str | os.PathLike,
    target: str | None = None,
    categorical: Iterable[str] = (),
    skip: Iterable[str] = (),
) -> dict[str, str]:
    """Build a schema from a CSV header: everything numeric unless stated otherwise.

    Roles are declared by the caller, never guessed from the cell contents.
    """
    header = _read_header(path)
    categorical, skip = set(categorical), set(skip)
    for name in [*categorical, *skip, *([target] if target else [])]:
        if name not in header:
            raise DataError(f"column {name!r} not found in header of {os.fspath(path)}")
    schema = {}
    for name in header:
        if name == target:
            schema[name] = Role.TARGET.value
        elif name in skip:
            schema[name] = SKIP
        elif name in categorical:
            schema[name] = Role.CATEGORICAL.value
        else:
            schema[name] = Role.NUMERIC.value
    return schema


def _read_header(path: str | os.PathLike) -> list[str]:
    if not os.path.isfile(path):
        raise DataError(f"no such file: {os.fspath(path)}")
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise DataError(f"{os.fspath(path)} is empty")
    return [h.strip() for h in header]


def load_csv(path: str | os.PathLike, schema: Mapping[str, str]) -> Frame:
    """Read a comma-separated file whose header matches ``schema``.

    ``schema`` maps every header name to ``"numeric"``, ``"categorical"``,
    ``"target"`` or ``"skip"``. Categorical levels get codes in order of first
    appearance. Any unparseable or missing cell is an error naming its row
    (1-based, header excluded) and column.
    """
    header = _read_header(path)
    if sorted(header) != sorted(schema):
        missing = sorted(set(schema) - set(header))
        extra = sorted(set(header) - set(schema))
        raise DataError(f"header/schema mismatch: missing {missing}, unexpected {extra}")
    roles = {}
    for name, role in schema.items():
        if role != SKIP:
            try:
                roles[name] = Role(role)
            except ValueError:
                raise DataError(f"unknown role {role!r} for column {name!r}") from None

    kept = [(i, name) for i, name in enumerate(header) if name in roles]
    raw: dict[str, list] = {name: [] for _, name in kept}
    levels: dict[str, dict[str, int]] = {name: {} for _, name in kept if roles[name] is Role.CATEGORICAL}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row_no, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise DataError(f"row {row_no}: expected {len(header)} cells, found {len(record)}")
            for i, name in kept:
                cell = record[i]
                if roles[name] is Role.CATEGORICAL:
                    text = cell.strip()
                    if text == "":
                        raise DataError(f"row {row_no}, column {name!r}: missing value")
                    code = levels[name].setdefault(text, len(levels[name]))
                    raw[name].append(code)
                else:
                    value = _parse_float(cell, row_no, name)
                    if roles[name] is Role.TARGET and value not in (0.0, 1.0):
                        raise DataError(f"row {row_no}, column {name!r}: target must be 0 or 1, got {cell!r}")
                    raw[name].append(value)

    columns = [
        Column(name, roles[name], tuple(levels[name]) if name in levels else ())
        for _, name in kept
    ]
    return Frame(columns, {name: np.asarray(vals) for name, vals in raw.items()})


def write_csv(frame: Frame, path: str | os.PathLike) -> None:
    """Write a frame so that :func:`load_csv` with the same roles reads it back."""
    cols = [frame.decoded(n) if frame.column(n).role is Role.CATEGORICAL else frame.values(n) for n in frame.names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(frame.names)
        for i in range(frame.n_rows):
            writer.writerow([
                c[i] if isinstance(c, list) else _fmt_cell(c[i]) for c in cols
            ])


def _fmt_cell(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


# -- synthetic data ---------------------------------------------------------

@dataclass(frozen=True)
class SyntheticConfig:
    n_rows: int
    n_features: int = 9
    seed: int = 12345
    noise_rate: float = 0.15
    threshold: float = 0.42

    def validate(self) -> None:
        if self.n_rows < 0:
            raise DataError("n_rows must be non-negative")
        if self.n_features < 9:
            raise DataError("n_features must be at least 9")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise DataError("noise_rate must lie in [0, 1]")
        if not math.isfinite(self.threshold):
            raise DataError("threshold must be finite")


def synthetic_signal(x: np.ndarray) -> np.ndarray:
    """``X_num1*X_num4 + |X_num8|*X_num9**2`` for an ``n x p`` matrix (p >= 9)."""
    x = np.atleast_2d(x)
    return x[:, 0] * x[:, 3] + np.abs(x[:, 7]) * x[:, 8] ** 2


def noiseless_labels(frame: Frame, threshold: float = 0.42) -> np.ndarray:
    names = [f"X_num{i}" for i in range(1, 10)]
    return (synthetic_signal(frame.matrix(names)) >= threshold).astype(np.float64)


def generate_synthetic(cfg: SyntheticConfig) -> Frame:
    """Standard-normal features with a thresholded interaction signal and label-switching noise."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal((cfg.n_rows, cfg.n_features))
    clean = (synthetic_signal(x) >= cfg.threshold).astype(np.float64) if cfg.n_rows else np.zeros(0)
    flip = rng.random(cfg.n_rows) < cfg.noise_rate
    label = np.where(flip, 1.0 - clean, clean)
    names = [f"X_num{i}" for i in range(1, cfg.n_features + 1)]
    columns = [Column(n, Role.NUMERIC) for n in names] + [Column("label", Role.TARGET)]
    data = {n: x[:, j] for j, n in enumerate(names)}
    data["label"] = label
    return Frame(columns, data)


# -- slicing ----------------------------------------------------------------

def split(frame: Frame, valid_fraction: float, seed: int) -> tuple[Frame, Frame]:
    """Seeded random partition into (train, valid); rows keep their original order."""
    if frame.n_rows == 0:
        raise DataError("cannot split an empty frame")
    if not 0.0 < valid_fraction < 1.0:
        raise DataError("valid_fraction must lie strictly between 0 and 1")
    n = frame.n_rows
    n_train = int(math.floor(n * (1.0 - valid_fraction) + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    train_idx = np.sort(perm[:n_train])
    valid_idx = np.sort(perm[n_train:])
    return frame.take(train_idx), frame.take(valid_idx)


def as_categorical(frame: Frame, columns: Sequence[str]) -> Frame:
    """Re-declare numeric columns as categorical; codes follow ascending value order."""
    new_cols, data = [], {}
    wanted = set(columns)
    for name in columns:
        frame.column(name)
    for col in frame.columns:
        values = frame.values(col.name)
        if col.name in wanted and col.role is Role.NUMERIC:
            uniq, codes = np.unique(values, return_inverse=True)
            new_cols.append(Column(col.name, Role.CATEGORICAL, tuple(format_level(u) for u in uniq)))
            data[col.name] = codes
        elif col.name in wanted and col.role is Role.TARGET:
            raise DataError(f"cannot make target {col.name!r} categorical")
        else:
            new_cols.append(col)
            data[col.name] = values
    return Frame(new_cols, data)


def one_hot_encode(frame: Frame, columns: Sequence[str]) -> Frame:
    """Replace each named categorical column with ``COL == level`` indicators.

    One indicator per level observed in this frame, in level-code order.
    """
    wanted = list(columns)
    for name in wanted:
        if frame.column(name).role is not Role.CATEGORICAL:
            raise DataError(f"column {name!r} is not categorical")
    new_cols, data = [], {}
    for col in frame.columns:
        values = frame.values(col.name)
        if col.name not in wanted:
            new_cols.append(col)
            data[col.name] = values
            continue
        for code in np.unique(values):
            indicator = f"{col.name} == {col.levels[code]}"
            new_cols.append(Column(indicator, Role.NUMERIC))
            data[indicator] = (values == code).astype(np.float64)
    return Frame(new_cols, data)


_PREDICATE = re.compile(r"^\s*([^\s<>=]+)\s*(>=|<=|==|>|<)\s*(\S+)\s*$")

_OPS = {
    ">": np.greater,
    ">=": np.greater_equal,
    "<": np.less,
    "<=": np.less_equal,
    "==": np.equal,
}


def parse_predicate(predicate: str) -> tuple[str, str, str]:
    match = _PREDICATE.match(predicate)
    if not match:
        raise DataError(f"cannot parse predicate {predicate!r}; expected '<column> <op> <value>'")
    return match.group(1), match.group(2), match.group(3)


def filter_segment(frame: Frame, predicate: str) -> Frame:
    """Keep rows satisfying a single comparison such as ``"PAY_0 > 1"``."""
    name, op, literal = parse_predicate(predicate)
    col = frame.column(name)
    if col.role is Role.CATEGORICAL:
        try:
            numeric = frame.numeric_values(name)
        except DataError:
            if op != "==":
                raise DataError(f"operator {op!r} needs numeric levels in column {name!r}") from None
            keep = np.array([v == literal for v in frame.decoded(name)], dtype=bool)
            return frame.mask(keep)
    else:
        numeric = frame.values(name)
    try:
        threshold = float(literal)
    except ValueError:
        raise DataError(f"cannot parse {literal!r} in predicate {predicate!r} as a number") from None
    return frame.mask(_OPS[op](numeric, threshold))


# -- UCI credit card default data ------------------------------------------------

UCI_TARGETS = ("default.payment.next.month", "default payment next month")
UCI_PAY = ("PAY_0", "PAY_2", "PAY_3", "PAY_4", "PAY_5", "PAY_6")
UCI_FEATURES = (
    "LIMIT_BAL",
    *UCI_PAY,
    *(f"BILL_AMT{i}" for i in range(1, 7)),
    *(f"PAY_AMT{i}" for i in range(1, 7)),
)
UCI_DEMOGRAPHICS = ("SEX", "EDUCATION", "MARRIAGE", "AGE")


def load_uci(path: str | os.PathLike) -> Frame:
    """Load the credit card default CSV: ID skipped, every other column numeric.

    The demographic columns stay in the frame for fairness audits; select
    :data:`UCI_FEATURES` for modelling.
    """
    header = _read_header(path)
    target = next((t for t in UCI_TARGETS if t in header), None)
    if target is None:
        raise DataError(f"{os.fspath(path)} has no default target column (looked for {list(UCI_TARGETS)})")
    missing = [n for n in UCI_FEATURES if n not in header]
    if missing:
        raise DataError(f"{os.fspath(path)} lacks columns {missing}")
    skip = [n for n in header if n.upper() == "ID"]
    return load_csv(path, infer_schema(path, target=target, skip=skip))
