"""Individual and grouped importance of additive-model terms.

The importance of a set of features ``G`` on a dataset ``T`` is the weighted
mean over samples of ``|sum_{j in G} f_j(t_j)|``. For a single feature this
is the usual mean absolute contribution. Members are always summed in model
feature order, which makes the value independent of how a group lists its
members, bit for bit.
"""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from gamgroup.data import DataError, FeatureGroup, all_features_group

_LANES = 4096


def compensated_sum(values):
    """Sum with Neumaier compensation, vectorized across fixed-width lanes.

    The array is laid out as rows of ``_LANES`` values; each lane keeps its
    own running sum and error term, and the lane totals are combined exactly
    with ``math.fsum``. Results agree with the exact sum to a few ulps of
    ``sum(|values|)``, whatever the length.
    """
    a = np.ravel(np.asarray(values, dtype=np.float64))
    if a.size <= _LANES:
        return math.fsum(a.tolist())
    rows = -(-a.size // _LANES)
    grid = np.zeros(rows * _LANES)
    grid[: a.size] = a
    grid = grid.reshape(rows, _LANES)
    s = grid[0].copy()
    c = np.zeros(_LANES)
    for row in grid[1:]:
        t = s + row
        big = np.abs(s) >= np.abs(row)
        c += np.where(big, (s - t) + row, (row - t) + s)
        s = t
    return math.fsum(s.tolist() + c.tolist())


def _weighted_abs_sum(total, weights, unit_weights):
    if unit_weights:
        return compensated_sum(np.abs(total))
    return compensated_sum(weights * np.abs(total))


def _member_positions(model, members):
    positions = []
    for m in members:
        try:
            positions.append(model.position(m))
        except KeyError:
            raise DataError(f"unknown feature {m!r}") from None
    return sorted(positions)


def _group_total(model, dataset, positions, include_pairs, rows=None):
    X = dataset.X if rows is None else dataset.X[rows]
    total = np.zeros(X.shape[0])
    for pos in positions:
        shape = model.shapes[pos]
        total += shape(X[:, dataset.index_of(shape.name)])
    if include_pairs and model.pairs:
        names = {model.shapes[pos].name for pos in positions}
        for p in model.pairs:
            if p.i in names and p.j in names:
                total += p(X[:, dataset.index_of(p.i)], X[:, dataset.index_of(p.j)])
    return total


def _importance(model, dataset, members, include_pairs=False, workers=1):
    positions = _member_positions(model, members)
    w = dataset.weights
    unit = bool(np.all(w == 1.0))
    wsum = float(w.size) if unit else compensated_sum(w)
    if wsum <= 0:
        raise DataError("dataset has zero total weight")
    if not positions:
        return 0.0
    if workers <= 1:
        total = _group_total(model, dataset, positions, include_pairs)
        return _weighted_abs_sum(total, w, unit) / wsum

    chunks = np.array_split(np.arange(dataset.n), workers)

    def part(rows):
        total = _group_total(model, dataset, positions, include_pairs, rows)
        return _weighted_abs_sum(total, w[rows], unit)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        partials = list(pool.map(part, chunks))
    return math.fsum(partials) / wsum


def feature_importance(model, dataset, feature, workers=1):
    """Weighted mean of ``|f_feature(t_feature)|`` over ``dataset``."""
    return _importance(model, dataset, (feature,), workers=workers)


def group_importance(model, dataset, group, include_pairs=False, workers=1):
    """Weighted mean of ``|sum of member contributions|`` over ``dataset``.

    Parameters
    ----------
    group : FeatureGroup or iterable of feature names
    include_pairs : bool
        Also add each pair term whose two features are both in the group.
        Off by default, which gives the plain main-effect definition.
    workers : int
        Split the samples across this many threads. Partial sums are combined
        exactly, so the result does not depend on the split beyond rounding of
        the per-chunk compensated sums.

    Costs one bin lookup per member per sample.
    """
    members = group.members if isinstance(group, FeatureGroup) else tuple(group)
    if len(set(members)) != len(members):
        raise DataError("group lists a feature more than once")
    return _importance(model, dataset, members, include_pairs, workers)


def naive_sum_importance(model, dataset, group):
    """Sum of the members' individual importances.

    This is what averaging ``sum_j |f_j|`` instead of ``|sum_j f_j|`` would
    give; it ignores cancellation between members and is an upper bound on
    :func:`group_importance`.
    """
    members = group.members if isinstance(group, FeatureGroup) else tuple(group)
    _member_positions(model, members)
    return math.fsum(feature_importance(model, dataset, m) for m in members)


def total_importance(model, dataset, include_pairs=False):
    return group_importance(model, dataset, model.feature_names, include_pairs)


@dataclass(frozen=True)
class GroupScore:
    name: str
    value: float
    relative: float
    members: tuple


@dataclass(frozen=True)
class ImportanceReport:
    features: tuple  # ((name, value), ...) in model order
    groups: tuple  # GroupScore, in input order
    total: float
    ranking: tuple  # group names, most important first

    def group(self, name):
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def to_dict(self):
        return {
            "features": [{"name": n, "value": v} for n, v in self.features],
            "groups": [
                {"name": g.name, "value": g.value, "relative": g.relative, "members": list(g.members)}
                for g in self.groups
            ],
            "total": self.total,
            "ranking": list(self.ranking),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    def to_csv(self):
        """One row per group: ``name,value,relative,rank`` (rank 1 = top)."""
        rank = {name: k + 1 for k, name in enumerate(self.ranking)}
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "value", "relative", "rank"])
        for name in self.ranking:
            g = self.group(name)
            w.writerow([g.name, repr(g.value), repr(g.relative), rank[name]])
        return buf.getvalue()


def rank_groups(scores):
    """Names sorted by value descending, ties by name."""
    return tuple(name for name, _ in sorted(scores, key=lambda s: (-s[1], s[0])))


def importance_report(model, dataset, groups=(), include_pairs=False, total_name="all"):
    """Individual importances, group importances, relative fractions, ranking.

    ``relative`` is a group's importance divided by the importance of the
    group of all model features. With no groups given, the report holds the
    all-features group alone.
    """
    groups = list(groups)
    for g in groups:
        g.validate(model.feature_names)
    if not groups:
        groups = [all_features_group(model.feature_names, total_name)]
    features = tuple((n, feature_importance(model, dataset, n)) for n in model.feature_names)
    total = total_importance(model, dataset, include_pairs)
    scored = []
    for g in groups:
        value = group_importance(model, dataset, g, include_pairs)
        rel = value / total if total > 0 else 0.0
        scored.append(GroupScore(g.name, value, rel, tuple(g.members)))
    names = [g.name for g in groups]
    if len(set(names)) != len(names):
        raise DataError("duplicate group names in report")
    ranking = rank_groups([(s.name, s.value) for s in scored])
    return ImportanceReport(features, tuple(scored), total, ranking)
