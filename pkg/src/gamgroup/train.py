"""Cyclic gradient boosting of binned shape functions.

Each round visits the features in dataset order. For the visited feature,
every bin moves by ``learning_rate`` times the weighted mean residual
``y - p`` of the training samples in that bin (a histogram stump that updates
all bins at once). Bins without training weight never move. Optional pair
surfaces are boosted the same way after the main effects have finished, on
a coarser grid, and then purified.
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from gamgroup import rng
from gamgroup.binning import DEFAULT_MAX_BINS, apply_bins, coarsen, fit_bins
from gamgroup.model import GamModel, PairShape, ShapeFunction

log = logging.getLogger(__name__)


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    rounds: int = 2000
    patience: int = 50
    validation_fraction: float = 0.15
    max_bins: int = DEFAULT_MAX_BINS
    max_pair_bins: int = 32
    pairs: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise TrainingError("learning_rate must be > 0")
        if int(self.rounds) < 1:
            raise TrainingError("rounds must be >= 1")
        if int(self.patience) < 1:
            raise TrainingError("patience must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise TrainingError("validation_fraction must be in [0, 1)")
        if int(self.max_bins) < 2 or int(self.max_pair_bins) < 2:
            raise TrainingError("bin counts must be >= 2")
        pairs = tuple(tuple(p) for p in self.pairs)
        for p in pairs:
            if len(p) != 2 or p[0] == p[1]:
                raise TrainingError(f"invalid pair {p!r}")
        object.__setattr__(self, "pairs", pairs)

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _logloss(score, y, w, wsum):
    # log(1 + e^s) - y s, stable for large |s|
    return float(np.dot(w, np.logaddexp(0.0, score) - y * score) / wsum)


@dataclass
class _Tracker:
    patience: int
    best: float = np.inf
    best_round: int = 0
    stale: int = 0

    def update(self, round_no, val_loss):
        """Record a round; return True when training should stop."""
        if val_loss < self.best:
            self.best, self.best_round, self.stale = val_loss, round_no, 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def _split(n, fraction, seed):
    if fraction <= 0:
        return np.arange(n), np.arange(0)
    order = rng.stream(seed, rng.STREAMS["validation_split"]).permutation(n)
    n_val = int(round(fraction * n))
    n_val = min(max(n_val, 1), n - 1)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def train(dataset, config=None):
    """Fit a logistic additive model.

    Parameters
    ----------
    dataset : Dataset
        Training data; bins are fitted on all of its rows.
    config : TrainConfig, optional

    Returns
    -------
    GamModel
        Shape functions zero-centered over ``dataset`` (weighted), with their
        means moved into the intercept. When early stopping is active the
        shapes are those of the round with the best held-out loss.
    """
    return train_with_history(dataset, config)[0]


def train_with_history(dataset, config=None):
    """Like :func:`train` but also return ``[(train_loss, val_loss), ...]``."""
    config = config or TrainConfig()
    n, p = dataset.X.shape
    y_all = dataset.y.astype(np.float64)
    w_all = dataset.weights
    if n < 2:
        raise TrainingError("dataset is empty or has a single row")
    if np.all(y_all == y_all[0]):
        raise TrainingError("single-class target")
    for a, b in config.pairs:
        for name in (a, b):
            if not dataset.has_feature(name):
                raise TrainingError(f"pair names unknown feature {name!r}")

    bin_maps = [fit_bins(dataset.X[:, k], config.max_bins, w_all) for k in range(p)]
    bins = np.column_stack([apply_bins(bin_maps[k], dataset.X[:, k]) for k in range(p)])

    tr, va = _split(n, config.validation_fraction, config.seed)
    y, w = y_all[tr], w_all[tr]
    wsum = w.sum()
    if wsum <= 0:
        raise TrainingError("training split has zero total weight")
    prior = float(np.dot(w, y) / wsum)
    if not 0 < prior < 1:
        raise TrainingError("single-class target in training split")
    intercept = float(np.log(prior / (1 - prior)))

    btr, bva = bins[tr], bins[va]
    yv, wv = y_all[va], w_all[va]
    wvsum = wv.sum()
    has_val = va.size > 0 and wvsum > 0

    s_tr = np.full(tr.size, intercept)
    s_va = np.full(va.size, intercept)
    contrib = [np.zeros(bm.n_bins) for bm in bin_maps]
    mass = [np.bincount(btr[:, k], w, minlength=bin_maps[k].n_bins) for k in range(p)]
    inv_mass = [np.divide(1.0, m, out=np.zeros_like(m), where=m > 0) for m in mass]

    lr = float(config.learning_rate)
    tracker = _Tracker(int(config.patience))
    best = [c.copy() for c in contrib]
    history = []
    rounds_executed = 0
    for r in range(1, int(config.rounds) + 1):
        for k in range(p):
            resid = w * (y - expit(s_tr))
            delta = lr * np.bincount(btr[:, k], resid, minlength=contrib[k].size) * inv_mass[k]
            contrib[k] += delta
            s_tr += delta[btr[:, k]]
            if has_val:
                s_va += delta[bva[:, k]]
        rounds_executed = r
        train_loss = _logloss(s_tr, y, w, wsum)
        val_loss = _logloss(s_va, yv, wv, wvsum) if has_val else train_loss
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise TrainingError(f"loss is NaN at round {r}")
        history.append((train_loss, val_loss))
        stop = tracker.update(r, val_loss)
        if tracker.best_round == r:
            best = [c.copy() for c in contrib]
        if stop:
            break
    contrib = best
    main_best = tracker.best_round
    log.debug("main effects: %d rounds run, best round %d", rounds_executed, main_best)

    # Recompute scores from the restored shapes for the pair stage.
    s_tr = intercept + sum(contrib[k][btr[:, k]] for k in range(p))
    s_va = intercept + sum(contrib[k][bva[:, k]] for k in range(p))

    pair_specs = []
    for a, b in config.pairs:
        ia, ib = dataset.index_of(a), dataset.index_of(b)
        if ia > ib:
            ia, ib = ib, ia
        pair_specs.append((ia, ib))
    pair_specs = list(dict.fromkeys(pair_specs))
    pair_rounds = 0
    pair_mats, pair_bins = [], []
    if pair_specs:
        for ia, ib in pair_specs:
            ca = coarsen(bin_maps[ia], mass[ia][:-1], config.max_pair_bins)
            cb = coarsen(bin_maps[ib], mass[ib][:-1], config.max_pair_bins)
            pair_bins.append((ca, cb))
            pair_mats.append(np.zeros((ca.n_bins, cb.n_bins)))
        cells_tr = [
            apply_bins(ca, dataset.X[tr, ia]) * cb.n_bins + apply_bins(cb, dataset.X[tr, ib])
            for (ia, ib), (ca, cb) in zip(pair_specs, pair_bins)
        ]
        cells_va = [
            apply_bins(ca, dataset.X[va, ia]) * cb.n_bins + apply_bins(cb, dataset.X[va, ib])
            for (ia, ib), (ca, cb) in zip(pair_specs, pair_bins)
        ]
        cell_inv = []
        for cells, m in zip(cells_tr, pair_mats):
            cm = np.bincount(cells, w, minlength=m.size)
            cell_inv.append(np.divide(1.0, cm, out=np.zeros_like(cm), where=cm > 0))
        tracker = _Tracker(int(config.patience))
        best_pairs = [m.copy() for m in pair_mats]
        for r in range(1, int(config.rounds) + 1):
            for q, m in enumerate(pair_mats):
                resid = w * (y - expit(s_tr))
                delta = lr * np.bincount(cells_tr[q], resid, minlength=m.size) * cell_inv[q]
                m += delta.reshape(m.shape)
                s_tr += delta[cells_tr[q]]
                if has_val:
                    s_va += delta[cells_va[q]]
            pair_rounds = r
            train_loss = _logloss(s_tr, y, w, wsum)
            val_loss = _logloss(s_va, yv, wv, wvsum) if has_val else train_loss
            if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
                raise TrainingError(f"loss is NaN at pair round {r}")
            history.append((train_loss, val_loss))
            stop = tracker.update(r, val_loss)
            if tracker.best_round == r:
                best_pairs = [m.copy() for m in pair_mats]
            if stop:
                break
        pair_mats = best_pairs

    # Zero-center main effects over the full dataset.
    full_mass = [np.bincount(bins[:, k], w_all, minlength=bin_maps[k].n_bins) for k in range(p)]
    total = w_all.sum()
    for k in range(p):
        mean = float(np.dot(full_mass[k], contrib[k]) / total)
        contrib[k] = contrib[k] - mean
        intercept += mean

    meta = {
        "seed": int(config.seed),
        "learning_rate": float(config.learning_rate),
        "rounds_run": int(main_best),
        "rounds_executed": int(rounds_executed),
        "pair_rounds": int(pair_rounds),
        "max_bins": int(config.max_bins),
        "config_hash": config.digest(),
    }
    shapes = tuple(
        ShapeFunction(dataset.feature_names[k], bin_maps[k], contrib[k]) for k in range(p)
    )
    pairs = tuple(
        PairShape(dataset.feature_names[ia], dataset.feature_names[ib], ca, cb, m)
        for (ia, ib), (ca, cb), m in zip(pair_specs, pair_bins, pair_mats)
    )
    model = GamModel(intercept, shapes, pairs, "logistic", meta)
    if pairs:
        from gamgroup.purify import purify_pairs

        model = purify_pairs(model, dataset)
    return model, history

