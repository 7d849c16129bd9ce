"""Metrics, subject-aware stratified cross-validation and selection curves."""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from gamgroup import rng
from gamgroup.importance import group_importance

METRICS = ("auc", "brier", "balanced_accuracy")


class EvaluationError(ValueError):
    pass


def _labels(labels):
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 1 or y.size < 1:
        raise EvaluationError("labels must be a nonempty 1-d array")
    if not np.all((y == 0) | (y == 1)):
        raise EvaluationError("labels must be binary")
    return y


def auc(labels, scores):
    """Area under the ROC curve as the Mann-Whitney statistic (ties count 1/2)."""
    y = _labels(labels)
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise EvaluationError("labels and scores differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("auc needs both classes present")
    ranks = rankdata(s, method="average")
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def brier(labels, probabilities, weights=None):
    y = _labels(labels)
    p = np.asarray(probabilities, dtype=np.float64)
    if p.shape != y.shape:
        raise EvaluationError("labels and probabilities differ in length")
    return float(np.average((p - y) ** 2, weights=weights))


def balanced_accuracy(labels, probabilities, threshold=0.5):
    """Mean of sensitivity and specificity with ``p >= threshold`` as positive.

    A class absent from ``labels`` is left out of the mean.
    """
    y = _labels(labels)
    p = np.asarray(probabilities, dtype=np.float64)
    if p.shape != y.shape:
        raise EvaluationError("labels and probabilities differ in length")
    pred = p >= threshold
    rates = []
    if (y == 1).any():
        rates.append(pred[y == 1].mean())
    if (y == 0).any():
        rates.append((~pred[y == 0]).mean())
    return float(np.mean(rates))


def logloss(labels, probabilities, eps=1e-15):
    y = _labels(labels)
    p = np.clip(np.asarray(probabilities, dtype=np.float64), eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


# ---------------------------------------------------------------------------
# Folds


def kfold_split(dataset, k, seed):
    """Assign every row a test fold in ``0..k-1``.

    Without subject ids, rows are stratified by label. With subject ids, whole
    subjects are assigned, stratified by whether the subject has any positive
    row. Within each stratum the units are shuffled with the seed and dealt
    round-robin, continuing where the previous stratum stopped.
    """
    k = int(k)
    if k < 2:
        raise EvaluationError("k must be >= 2")
    y = dataset.y
    if dataset.subject_ids is None:
        unit_of_row = np.arange(dataset.n)
        unit_key = y.astype(bool)
    else:
        uniq, unit_of_row = np.unique(dataset.subject_ids.astype(str), return_inverse=True)
        unit_key = np.zeros(uniq.size, dtype=bool)
        np.logical_or.at(unit_key, unit_of_row, y.astype(bool))
    n_units = unit_key.size
    if k > n_units:
        kind = "subjects" if dataset.subject_ids is not None else "samples"
        raise EvaluationError(f"k={k} exceeds the {n_units} available {kind}")

    gen = rng.stream(seed, rng.STREAMS["fold_assignment"])
    fold_of_unit = np.empty(n_units, dtype=np.intp)
    offset = 0
    for stratum in (False, True):
        units = np.flatnonzero(unit_key == stratum)
        units = units[gen.permutation(units.size)]
        fold_of_unit[units] = (offset + np.arange(units.size)) % k
        offset = (offset + units.size) % k
    return fold_of_unit[unit_of_row]


@dataclass(frozen=True)
class CvReport:
    k: int
    seed: int
    folds: dict  # metric -> tuple of per-fold values
    mean: dict
    sem: dict

    def to_dict(self):
        return {
            "k": self.k,
            "seed": self.seed,
            "folds": {m: list(v) for m, v in self.folds.items()},
            "mean": dict(self.mean),
            "sem": dict(self.sem),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold"] + list(METRICS))
        for f in range(self.k):
            w.writerow([f] + [repr(self.folds[m][f]) for m in METRICS])
        w.writerow(["mean"] + [repr(self.mean[m]) for m in METRICS])
        w.writerow(["sem"] + [repr(self.sem[m]) for m in METRICS])
        return buf.getvalue()


def _sem(values):
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    return float(v.std(ddof=1) / math.sqrt(v.size))


def cv_evaluate(dataset, train_config=None, k=5, seed=0):
    """Train one model per fold (bins fitted on the training rows only)."""
    from gamgroup.train import train

    folds = kfold_split(dataset, k, seed)
    values = {m: [] for m in METRICS}
    for f in range(k):
        test = np.flatnonzero(folds == f)
        fit = np.flatnonzero(folds != f)
        model = train(dataset.take(fit), train_config)
        held = dataset.take(test)
        prob = model.predict_proba(held)
        y = held.y
        values["auc"].append(auc(y, prob) if 0 < y.sum() < y.size else math.nan)
        values["brier"].append(brier(y, prob))
        values["balanced_accuracy"].append(balanced_accuracy(y, prob))
    mean = {m: float(np.nanmean(v)) for m, v in values.items()}
    sem = {m: _sem([x for x in v if not math.isnan(x)]) for m, v in values.items()}
    return CvReport(int(k), int(seed), {m: tuple(v) for m, v in values.items()}, mean, sem)


def fold_bin_cuts(dataset, k, seed, feature, max_bins=256):
    """Cut points each fold's training rows would produce for one feature."""
    from gamgroup.binning import fit_bins

    folds = kfold_split(dataset, k, seed)
    col = dataset.column(feature)
    return [
        fit_bins(col[folds != f], max_bins, dataset.weights[folds != f]).cuts for f in range(k)
    ]


# ---------------------------------------------------------------------------
# Curves


def _union_members(groups, order=None):
    seen = {}
    for g in groups:
        for m in g.members:
            seen.setdefault(m, None)
    names = list(seen)
    if order is not None:
        pos = {n: i for i, n in enumerate(order)}
        names.sort(key=lambda n: pos[n])
    return names


@dataclass(frozen=True)
class CurvePoint:
    m: int
    groups: tuple
    auc: float
    brier: float
    auc_sem: float
    brier_sem: float


def top_k_groups_curve(dataset, groups_ranked, train_config=None, k_folds=5, seed=0):
    """CV metrics when training on the union of the top ``m`` groups, for each ``m``."""
    groups_ranked = list(groups_ranked)
    if not groups_ranked:
        raise EvaluationError("groups_ranked is empty")
    for g in groups_ranked:
        g.validate(dataset.feature_names)
    points = []
    for m in range(1, len(groups_ranked) + 1):
        names = _union_members(groups_ranked[:m], dataset.feature_names)
        if not names:
            raise EvaluationError(f"top {m} groups contain no features")
        rep = cv_evaluate(dataset.select(names), train_config, k_folds, seed)
        points.append(
            CurvePoint(
                m,
                tuple(g.name for g in groups_ranked[:m]),
                rep.mean["auc"],
                rep.mean["brier"],
                rep.sem["auc"],
                rep.sem["brier"],
            )
        )
    return points


def cumulative_importance_curve(model, dataset, units_ranked):
    """``[(m, I(union of the top m units))]`` with overlapping members counted once."""
    units_ranked = list(units_ranked)
    for u in units_ranked:
        u.validate(model.feature_names)
    out = []
    for m in range(1, len(units_ranked) + 1):
        names = _union_members(units_ranked[:m])
        out.append((m, group_importance(model, dataset, names)))
    return out


def curve_to_csv(points):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "groups", "auc", "brier", "auc_sem", "brier_sem"])
    for p in points:
        w.writerow([p.m, "|".join(p.groups), repr(p.auc), repr(p.brier), repr(p.auc_sem), repr(p.brier_sem)])
    return buf.getvalue()
