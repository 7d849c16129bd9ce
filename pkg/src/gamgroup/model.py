"""The fitted additive model: intercept, shape functions and pair surfaces."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from gamgroup.binning import BinMap, apply_bins


class ModelError(ValueError):
    pass


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ShapeFunction:
    """Per-bin additive contribution of one feature (log-odds units).

    ``contributions`` has one entry per value bin followed by the missing bin.
    """

    name: str
    bins: BinMap
    contributions: np.ndarray

    def __post_init__(self):
        c = _frozen(self.contributions)
        if c.shape != (self.bins.n_bins,):
            raise ModelError(
                f"shape function {self.name!r}: {c.size} contributions for {self.bins.n_bins} bins"
            )
        if not np.all(np.isfinite(c)):
            raise ModelError(f"shape function {self.name!r} has non-finite entries")
        object.__setattr__(self, "contributions", c)

    def __call__(self, values):
        return self.contributions[apply_bins(self.bins, values)]


@dataclass(frozen=True, eq=False)
class PairShape:
    """Contribution surface over the bin grid of two features.

    Rows follow ``bins_i`` and columns ``bins_j``; the last row and column are
    the missing bins.
    """

    i: str
    j: str
    bins_i: BinMap
    bins_j: BinMap
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (self.bins_i.n_bins, self.bins_j.n_bins):
            raise ModelError(f"pair ({self.i}, {self.j}): matrix shape {m.shape} does not match bins")
        if not np.all(np.isfinite(m)):
            raise ModelError(f"pair ({self.i}, {self.j}) has non-finite entries")
        object.__setattr__(self, "matrix", m)

    def __call__(self, values_i, values_j):
        return self.matrix[apply_bins(self.bins_i, values_i), apply_bins(self.bins_j, values_j)]


@dataclass(frozen=True, eq=False)
class GamModel:
    """``logit P(y=1) = intercept + sum_i f_i(x_i) + sum_(i,j) f_ij(x_i, x_j)``."""

    intercept: float
    shapes: tuple
    pairs: tuple = ()
    link: str = "logistic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.link != "logistic":
            raise ModelError(f"unsupported link {self.link!r}")
        shapes = tuple(self.shapes)
        names = [s.name for s in shapes]
        if len(set(names)) != len(names):
            raise ModelError("duplicate shape function names")
        object.__setattr__(self, "intercept", float(self.intercept))
        object.__setattr__(self, "shapes", shapes)
        object.__setattr__(self, "pairs", tuple(self.pairs))
        object.__setattr__(self, "_index", {n: k for k, n in enumerate(names)})
        for p in self.pairs:
            if p.i not in self._index or p.j not in self._index:
                raise ModelError(f"pair ({p.i}, {p.j}) names an unknown feature")
            if self._index[p.i] >= self._index[p.j]:
                raise ModelError(f"pair ({p.i}, {p.j}) must follow model feature order")

    @property
    def feature_names(self):
        return tuple(s.name for s in self.shapes)

    def position(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown feature {name!r}") from None

    def shape(self, name):
        return self.shapes[self.position(name)]

    # -- evaluation --------------------------------------------------------

    def contributions(self, dataset, name):
        """Per-sample ``f_name(t_name)`` over a dataset."""
        shape = self.shape(name)
        return shape.contributions[apply_bins(shape.bins, dataset.column(name))]

    def pair_contributions(self, dataset, pair):
        return pair(dataset.column(pair.i), dataset.column(pair.j))

    def decision_function(self, dataset):
        """Additive scores for every row of ``dataset``."""
        for name in self.feature_names:
            if not dataset.has_feature(name):
                raise KeyError(f"dataset lacks model feature {name!r}")
        score = np.full(dataset.n, self.intercept)
        for shape in self.shapes:
            score += self.contributions(dataset, shape.name)
        for p in self.pairs:
            score += self.pair_contributions(dataset, p)
        return score

    def predict_proba(self, dataset):
        return expit(self.decision_function(dataset))

    def predict_score(self, sample):
        """Score one sample given as ``{feature name: value}`` (NaN = missing)."""
        unknown = set(sample) - set(self._index)
        if unknown:
            raise KeyError(f"unknown feature {sorted(unknown)[0]!r}")
        missing = [n for n in self._index if n not in sample]
        if missing:
            raise KeyError(f"sample lacks feature {missing[0]!r}")
        score = self.intercept
        for shape in self.shapes:
            score += float(shape(sample[shape.name]))
        for p in self.pairs:
            score += float(p(sample[p.i], sample[p.j]))
        return score

    def predict_one_proba(self, sample):
        return float(expit(self.predict_score(sample)))

    # -- persistence -------------------------------------------------------

    def to_dict(self):
        return {
            "intercept": self.intercept,
            "link": self.link,
            "features": [
                {
                    "name": s.name,
                    "cuts": list(s.bins.cuts),
                    "contributions": s.contributions[:-1].tolist(),
                    "missing_contribution": float(s.contributions[-1]),
                    "has_missing_bin": s.bins.has_missing_bin,
                }
                for s in self.shapes
            ],
            "pairs": [
                {
                    "i": p.i,
                    "j": p.j,
                    "cuts_i": list(p.bins_i.cuts),
                    "cuts_j": list(p.bins_j.cuts),
                    "max_bins": p.bins_i.max_bins,
                    "matrix": p.matrix.tolist(),
                }
                for p in self.pairs
            ],
            "meta": self.meta,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d):
        meta = dict(d.get("meta", {}))
        max_bins = int(meta.get("max_bins", 256))
        shapes = []
        for f in d["features"]:
            bins = BinMap(tuple(f["cuts"]), max_bins, bool(f.get("has_missing_bin", True)))
            contrib = list(f["contributions"]) + [f["missing_contribution"]]
            shapes.append(ShapeFunction(f["name"], bins, np.array(contrib)))
        pairs = []
        for p in d.get("pairs", []):
            pb = int(p.get("max_bins", max_bins))
            pairs.append(
                PairShape(
                    p["i"],
                    p["j"],
                    BinMap(tuple(p["cuts_i"]), pb),
                    BinMap(tuple(p["cuts_j"]), pb),
                    np.array(p["matrix"], dtype=np.float64),
                )
            )
        return cls(d["intercept"], tuple(shapes), tuple(pairs), d.get("link", "logistic"), meta)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    # -- derived models ----------------------------------------------------

    def replace(self, intercept=None, shapes=None, pairs=None, meta=None):
        return GamModel(
            self.intercept if intercept is None else intercept,
            self.shapes if shapes is None else shapes,
            self.pairs if pairs is None else pairs,
            self.link,
            self.meta if meta is None else meta,
        )
