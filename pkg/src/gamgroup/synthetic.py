"""Seeded two-feature datasets ``(x, z, y)`` with known signal structure.

``x ~ U[0, 10]`` in every variant. Random columns come from separate
substreams of :mod:`gamgroup.rng`: ``x`` from stream 0, the second feature's
randomness (independent ``z``, the offset ``delta`` or the sign of ``eps``)
from stream 1, and label noise from stream 2.

Variants
--------
additive_copy
    ``z = x`` (``z = -x`` with ``negate``), ``y = 1[x + N(0, 1) > 5]``.
additive_negated
    Shorthand for ``additive_copy`` with ``negate=True``.
conflicting_independent
    ``z ~ U[0, 10]``, ``y = 1[x > z]``.
conflicting_correlated
    ``z_raw = x + delta``, ``delta ~ U[-b, b]``; the feature ``z`` is
    ``z_raw`` min-max scaled to [0, 10] using the sample range, while the
    label is ``y = 1[x > z_raw]`` on the unscaled values.
additive_correlated
    ``z`` as in ``conflicting_correlated``; ``y = 1[x + N(0, 1) > 5]``.
discrete_eps
    ``z = clip(x + e, 0, 10)`` with ``e`` uniform on ``{-eps, +eps}``,
    ``y = 1[x > z]``.
"""

import csv
import io
from dataclasses import dataclass, replace

import numpy as np

from gamgroup import rng
from gamgroup.data import Dataset, FeatureGroup
from gamgroup.importance import feature_importance, group_importance
from gamgroup.train import TrainConfig, train

VARIANTS = (
    "additive_copy",
    "additive_negated",
    "conflicting_independent",
    "conflicting_correlated",
    "additive_correlated",
    "discrete_eps",
)

DEFAULT_N = 100_000
DEFAULT_B_GRID = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 1000.0)

#: Training protocol for ``discrete_eps`` data. With many narrow bins, each
#: bin only learns from the residuals of its own few samples, so a small
#: learning rate plus early stopping leaves the shape functions far from the
#: fitted optimum. A step of 4 is the largest with guaranteed descent for the
#: logistic loss (curvature at most 1/4), and the fit runs to the round limit.
CONVERGED = TrainConfig(learning_rate=4.0, rounds=2000, validation_fraction=0.0)


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    variant: str = "additive_copy"
    n: int = DEFAULT_N
    seed: int = 0
    b: float = 2.0
    eps: float = 2.0
    negate: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SynthError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if int(self.n) < 2:
            raise SynthError("n must be >= 2")
        if not self.b >= 0:
            raise SynthError("b must be >= 0")
        if self.variant == "discrete_eps" and not self.eps > 0:
            raise SynthError("eps must be > 0")
        if self.negate and self.variant not in ("additive_copy", "additive_negated"):
            raise SynthError(f"negate applies only to additive_copy, not {self.variant}")
        if self.variant == "conflicting_correlated" and self.b == 0:
            # y = 1[x > x] is identically 0
            raise SynthError("conflicting_correlated needs b > 0 (b = 0 gives a single-class target)")


def _minmax(v, lo=0.0, hi=10.0):
    vmin, vmax = v.min(), v.max()
    if vmax == vmin:
        return np.full_like(v, (lo + hi) / 2)
    return lo + (v - vmin) * ((hi - lo) / (vmax - vmin))


def generate(config):
    """Build the dataset described by ``config`` (bitwise reproducible)."""
    n, seed = int(config.n), int(config.seed)
    x = rng.stream(seed, rng.STREAMS["x"]).uniform(0.0, 10.0, n)
    second = rng.stream(seed, rng.STREAMS["z"])
    noise = rng.stream(seed, rng.STREAMS["label_noise"])
    v = config.variant

    if v in ("additive_copy", "additive_negated"):
        z = -x if (config.negate or v == "additive_negated") else x.copy()
        y = x + noise.standard_normal(n) > 5.0
    elif v == "conflicting_independent":
        z = second.uniform(0.0, 10.0, n)
        y = x > z
    elif v in ("conflicting_correlated", "additive_correlated"):
        b = float(config.b)
        z_raw = x + b * (2.0 * second.random(n) - 1.0)
        z = _minmax(z_raw)
        if v == "conflicting_correlated":
            y = x > z_raw
        else:
            y = x + noise.standard_normal(n) > 5.0
    elif v == "discrete_eps":
        sign = np.where(second.random(n) < 0.5, -1.0, 1.0)
        z = np.clip(x + sign * float(config.eps), 0.0, 10.0)
        y = x > z
    else:  # pragma: no cover - guarded by SynthConfig
        raise SynthError(f"unknown variant {v!r}")
    return Dataset(("x", "z"), np.column_stack([x, z]), y.astype(np.int8))


def generate_wide(n, n_features, seed=0, n_signal=5):
    """``n_features`` iid ``U[0, 10]`` columns ``f00, f01, ...``; the first
    ``n_signal`` drive a logistic target. Used for runtime benchmarks."""
    n, p = int(n), int(n_features)
    if n < 2 or p < 1:
        raise SynthError("need n >= 2 and n_features >= 1")
    X = rng.stream(seed, rng.STREAMS["x"]).uniform(0.0, 10.0, (n, p))
    k = min(int(n_signal), p)
    score = (X[:, :k] - 5.0).sum(axis=1) / max(k, 1)
    u = rng.stream(seed, rng.STREAMS["label_noise"]).random(n)
    y = u < 1.0 / (1.0 + np.exp(-score))
    names = tuple(f"f{i:02d}" for i in range(p))
    return Dataset(names, X, y.astype(np.int8))


def pearson(a, b):
    return float(np.corrcoef(a, b)[0, 1])


@dataclass(frozen=True)
class SweepRow:
    b: float
    rho: float
    importance_x: float
    importance_z: float
    importance_group: float


def correlation_sweep(base, b_values, train_config=None):
    """Importances of x, z and {x, z} across offset bounds ``b``.

    Every sweep point reuses ``base.seed``, so the underlying uniforms are
    shared and only the offset scale changes between points. Rows come back
    sorted by ``b``.
    """
    if base.variant not in ("additive_correlated", "conflicting_correlated"):
        raise SynthError("correlation_sweep needs a *_correlated variant")
    b_values = sorted(float(b) for b in b_values)
    if not b_values:
        raise SynthError("b_values is empty")
    rows = []
    pair = FeatureGroup("x+z", ("x", "z"))
    for b in b_values:
        ds = generate(replace(base, b=b))
        model = train(ds, train_config)
        rows.append(
            SweepRow(
                b,
                pearson(ds.column("x"), ds.column("z")),
                feature_importance(model, ds, "x"),
                feature_importance(model, ds, "z"),
                group_importance(model, ds, pair),
            )
        )
    return rows


def sweep_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["b", "rho", "I_x", "I_z", "I_group"])
    for r in rows:
        w.writerow([repr(r.b), repr(r.rho), repr(r.importance_x), repr(r.importance_z), repr(r.importance_group)])
    return buf.getvalue()
