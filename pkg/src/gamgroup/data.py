"""Datasets, feature groups, and their file formats.

Missing feature values are carried as ``NaN``; binning assigns them their own
bin, so nothing is imputed here.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named numeric feature columns with a binary target.

    Parameters
    ----------
    feature_names : sequence of str
        Unique, non-empty column names, in column order of ``X``.
    X : array of shape (n, p)
        Feature values; ``NaN`` marks a missing cell.
    y : array of shape (n,)
        Binary labels in {0, 1}.
    weights : array of shape (n,), optional
        Nonnegative finite sample weights. Defaults to all ones.
    subject_ids : array of shape (n,), optional
        Opaque subject identifiers used for subject-aware CV splits.
    """

    feature_names: tuple
    X: np.ndarray
    y: np.ndarray
    weights: np.ndarray = None
    subject_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        names = tuple(str(n) for n in self.feature_names)
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise DataError("X must be two-dimensional")
        n = X.shape[0]
        if n < 1:
            raise DataError("dataset is empty")
        if X.shape[1] != len(names):
            raise DataError(f"X has {X.shape[1]} columns but {len(names)} feature names")
        if any(not name for name in names):
            raise DataError("feature names must be non-empty")
        seen = set()
        for name in names:
            if name in seen:
                raise DataError(f"duplicate feature name {name!r}")
            seen.add(name)

        y = np.asarray(self.y, dtype=np.float64)
        if y.shape != (n,):
            raise DataError(f"target has shape {y.shape}, expected ({n},)")
        if not np.all((y == 0) | (y == 1)):
            raise DataError("target not binary: values must be 0 or 1")

        if self.weights is None:
            w = np.ones(n)
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (n,):
                raise DataError(f"weights have shape {w.shape}, expected ({n},)")
            if not np.all(np.isfinite(w)):
                raise DataError("weights must be finite")
            if np.any(w < 0):
                raise DataError("negative weight")

        sid = None
        if self.subject_ids is not None:
            sid = np.asarray(self.subject_ids)
            if sid.shape != (n,):
                raise DataError(f"subject_ids have shape {sid.shape}, expected ({n},)")
            sid = _readonly(sid)

        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "y", _readonly(y.astype(np.int8)))
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "subject_ids", sid)
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(names)})

    @classmethod
    def from_columns(cls, columns, y, weights=None, subject_ids=None):
        """Build a dataset from a ``{name: column}`` mapping (order preserved)."""
        names = list(columns)
        if not names:
            raise DataError("dataset needs at least one feature")
        X = np.column_stack([np.asarray(columns[k], dtype=np.float64) for k in names])
        return cls(names, X, y, weights, subject_ids)

    @property
    def n(self):
        return self.X.shape[0]

    def __len__(self):
        return self.X.shape[0]

    def has_feature(self, name):
        return name in self._index

    def index_of(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown feature {name!r}") from None

    def column(self, name):
        return self.X[:, self.index_of(name)]

    def take(self, rows):
        """Row subset (or reordering) as a new dataset."""
        rows = np.asarray(rows)
        sid = None if self.subject_ids is None else self.subject_ids[rows]
        return Dataset(self.feature_names, self.X[rows], self.y[rows], self.weights[rows], sid)

    def select(self, names):
        """Column subset in the given order."""
        idx = [self.index_of(name) for name in names]
        return Dataset(tuple(names), self.X[:, idx], self.y, self.weights, self.subject_ids)

    def replace_column(self, name, values):
        X = np.array(self.X)
        X[:, self.index_of(name)] = values
        return Dataset(self.feature_names, X, self.y, self.weights, self.subject_ids)

    def with_target(self, y):
        return Dataset(self.feature_names, self.X, y, self.weights, self.subject_ids)

    def equals(self, other):
        """Bitwise equality of every column (NaN equal to NaN)."""
        if self.feature_names != other.feature_names:
            return False
        if not np.array_equal(self.X, other.X, equal_nan=True):
            return False
        if not (np.array_equal(self.y, other.y) and np.array_equal(self.weights, other.weights)):
            return False
        if (self.subject_ids is None) != (other.subject_ids is None):
            return False
        return self.subject_ids is None or np.array_equal(self.subject_ids, other.subject_ids)


class FeatureGroup:
    """A named set of feature names, defined after training.

    Membership has set semantics (two groups with the same name and the same
    members in a different order compare equal) while ``members`` keeps the
    order given, for display. Groups may overlap and may be empty.
    """

    __slots__ = ("name", "members")

    def __init__(self, name: str, members: Sequence[str] = ()):
        members = tuple(members)
        if len(set(members)) != len(members):
            dup = next(m for m in members if members.count(m) > 1)
            raise DataError(f"group {name!r} lists feature {dup!r} more than once")
        object.__setattr__(self, "name", str(name))
        object.__setattr__(self, "members", members)

    def __setattr__(self, key, value):
        raise AttributeError("FeatureGroup is immutable")

    def __eq__(self, other):
        if not isinstance(other, FeatureGroup):
            return NotImplemented
        return self.name == other.name and frozenset(self.members) == frozenset(other.members)

    def __hash__(self):
        return hash((self.name, frozenset(self.members)))

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __repr__(self):
        return f"FeatureGroup({self.name!r}, {list(self.members)!r})"

    def validate(self, feature_names):
        known = set(feature_names)
        for m in self.members:
            if m not in known:
                raise DataError(f"group {self.name!r}: unknown feature {m!r}")
        return self


def all_features_group(feature_names, name="all"):
    return FeatureGroup(name, tuple(feature_names))


# ---------------------------------------------------------------------------
# CSV


def _parse_number(cell):
    """Parse one feature cell; blank or non-numeric text becomes NaN."""
    cell = cell.strip()
    if not cell:
        return math.nan, True
    try:
        return float(cell), True
    except ValueError:
        return math.nan, False


def load_csv(path, target_column, subject_column=None, weight_column=None):
    """Read a dataset from a comma-separated file with a header row.

    Every column other than the target, subject and weight columns is a
    numeric feature. Empty cells are missing. A column with content but no
    parseable numbers is treated as categorical and rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: missing header row") from None
        rows = [r for r in reader if r]

    if len(set(header)) != len(header):
        dup = next(h for h in header if header.count(h) > 1)
        raise DataError(f"{path}: duplicate column {dup!r}")
    special = {"target": target_column, "subject": subject_column, "weight": weight_column}
    for role, col in special.items():
        if col is not None and col not in header:
            raise DataError(f"{path}: {role} column {col!r} not found")
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 2} has {len(r)} cells, expected {len(header)}")
    if not rows:
        raise DataError(f"{path}: no data rows")

    cols = {h: [r[j] for r in rows] for j, h in enumerate(header)}

    y = []
    for cell in cols[target_column]:
        try:
            v = float(cell)
        except ValueError:
            raise DataError(f"target not binary: value {cell!r}") from None
        if v not in (0.0, 1.0):
            raise DataError(f"target not binary: value {cell!r}")
        y.append(v)

    weights = None
    if weight_column is not None:
        try:
            weights = np.array([float(c) for c in cols[weight_column]])
        except ValueError as e:
            raise DataError(f"weight column: {e}") from None
        if np.any(weights < 0):
            raise DataError("negative weight")

    subjects = None
    if subject_column is not None:
        subjects = np.array([c.strip() for c in cols[subject_column]], dtype=object)

    features = {}
    for h in header:
        if h in special.values():
            continue
        values, n_numeric, n_text = [], 0, 0
        for cell in cols[h]:
            v, ok = _parse_number(cell)
            values.append(v)
            if not ok:
                n_text += 1
            elif cell.strip():
                n_numeric += 1
        if n_text and not n_numeric:
            raise DataError(f"{path}: column {h!r} is categorical; only numeric features are supported")
        features[h] = values

    if not features:
        raise DataError(f"{path}: no feature columns")
    return Dataset.from_columns(features, y, weights, subjects)


def format_number(v):
    """Shortest decimal text that parses back to the same float; '' for NaN."""
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


def write_csv(dataset, path, target_column="y", subject_column=None, weight_column=None):
    """Write a dataset so that :func:`load_csv` reproduces it bitwise."""
    header = list(dataset.feature_names) + [target_column]
    if weight_column:
        header.append(weight_column)
    if subject_column and dataset.subject_ids is not None:
        header.append(subject_column)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(dataset.n):
            row = [format_number(v) for v in dataset.X[i]]
            row.append(str(int(dataset.y[i])))
            if weight_column:
                row.append(format_number(dataset.weights[i]))
            if subject_column and dataset.subject_ids is not None:
                row.append(str(dataset.subject_ids[i]))
            w.writerow(row)


# ---------------------------------------------------------------------------
# Groups


def _reject_duplicate_keys(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise DataError(f"duplicate group name {k!r}")
        out[k] = v
    return out


def parse_groups(obj, feature_names):
    if not isinstance(obj, dict):
        raise DataError("group file must be a JSON object of name -> [features]")
    groups = []
    for name, members in obj.items():
        if not isinstance(members, list) or not all(isinstance(m, str) for m in members):
            raise DataError(f"group {name!r} must map to a list of feature names")
        groups.append(FeatureGroup(name, members).validate(feature_names))
    return groups


def load_groups(path, dataset):
    """Read ``{group_name: [feature, ...]}`` and validate against ``dataset``."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(encoding="utf-8") as fh:
        try:
            obj = json.load(fh, object_pairs_hook=_reject_duplicate_keys)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: invalid JSON ({e})") from None
    return parse_groups(obj, dataset.feature_names)
