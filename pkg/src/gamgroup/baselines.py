"""Comparison baselines: grouped permutation importance and greedy selection."""

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from gamgroup import rng
from gamgroup.data import DataError, Dataset, FeatureGroup
from gamgroup.evaluation import auc, cv_evaluate, logloss
from gamgroup.importance import group_importance


class BaselineError(ValueError):
    pass


_METRICS = {"auc": auc, "logloss": logloss}


@dataclass(frozen=True)
class GpiResult:
    group: str
    metric: str
    baseline: float
    permuted: tuple
    mean_drop: float
    repeats: int
    seed: int

    def to_dict(self):
        return {
            "group": self.group,
            "metric": self.metric,
            "baseline": self.baseline,
            "permuted": list(self.permuted),
            "mean_drop": self.mean_drop,
            "repeats": self.repeats,
            "seed": self.seed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1) + "\n"


def permutation_for(seed, repeat, n):
    """Row permutation used by repeat ``repeat``; independent of scheduling."""
    return rng.stream(seed, rng.STREAMS["permutation"] + int(repeat)).permutation(n)


def grouped_permutation_importance(model, dataset, group, metric="auc", repeats=10, seed=0):
    """Metric drop after jointly shuffling all columns of ``group``.

    Each repeat draws one row permutation and applies it to every member
    column at once, so the members keep their joint distribution while their
    link to the other features and the target is broken. The model is then
    re-evaluated on the full dataset. The drop is oriented so that larger
    means more important for both metrics.
    """
    if metric not in _METRICS:
        raise BaselineError(f"unknown metric {metric!r}; choose auc or logloss")
    if int(repeats) < 1:
        raise BaselineError("repeats must be >= 1")
    members = group.members if isinstance(group, FeatureGroup) else tuple(group)
    name = group.name if isinstance(group, FeatureGroup) else "+".join(members)
    if not members:
        raise BaselineError("group is empty")
    for m in members:
        if m not in model.feature_names:
            raise DataError(f"unknown feature {m!r}")
    score = _METRICS[metric]
    y = dataset.y
    baseline = score(y, model.predict_proba(dataset))
    cols = [dataset.index_of(m) for m in members]
    permuted = []
    for r in range(int(repeats)):
        perm = permutation_for(seed, r, dataset.n)
        X = np.array(dataset.X)
        X[:, cols] = dataset.X[perm][:, cols]
        shuffled = Dataset(dataset.feature_names, X, y, dataset.weights, dataset.subject_ids)
        permuted.append(score(y, model.predict_proba(shuffled)))
    # averaging per-repeat drops keeps an unchanged metric at exactly 0
    sign = 1.0 if metric == "auc" else -1.0
    drop = math.fsum(sign * (baseline - v) for v in permuted) / len(permuted)
    return GpiResult(name, metric, float(baseline), tuple(permuted), float(drop), int(repeats), int(seed))


def gpi_to_csv(results):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "metric", "baseline", "mean_drop", "repeats", "seed"])
    for r in results:
        w.writerow([r.group, r.metric, repr(r.baseline), repr(r.mean_drop), r.repeats, r.seed])
    return buf.getvalue()


def _union(units):
    names = {}
    for u in units:
        for m in u.members:
            names.setdefault(m, None)
    return list(names)


def greedy_forward_selection(
    dataset, units, budget, objective="group_importance", train_config=None, seed=0, k_folds=5
):
    """Add units one at a time, each time taking the one that maximizes the objective.

    ``group_importance`` scores a candidate set by its group importance under
    one model trained on all features; ``cv_auc`` retrains on the candidate
    features and uses the mean ``k_folds``-fold AUC. Ties go to the
    lexicographically smallest unit name.

    Returns ``[(unit name, objective of the selected set), ...]``.
    """
    from gamgroup.train import train

    units = list(units)
    if not units:
        raise BaselineError("units is empty")
    names = [u.name for u in units]
    if len(set(names)) != len(names):
        raise BaselineError("unit names must be unique")
    if not 1 <= int(budget) <= len(units):
        raise BaselineError(f"budget must be between 1 and {len(units)}")
    for u in units:
        u.validate(dataset.feature_names)
    if objective not in ("group_importance", "cv_auc"):
        raise BaselineError(f"unknown objective {objective!r}")

    if objective == "group_importance":
        model = train(dataset, train_config)

        def score(selected):
            return group_importance(model, dataset, _union(selected))

    else:

        def score(selected):
            feats = _union(selected)
            if not feats:
                return 0.5
            order = [n for n in dataset.feature_names if n in set(feats)]
            return cv_evaluate(dataset.select(order), train_config, k_folds, seed).mean["auc"]

    chosen, remaining, out = [], sorted(units, key=lambda u: u.name), []
    for _ in range(int(budget)):
        best, best_val = None, -np.inf
        for u in remaining:
            val = score(chosen + [u])
            if val > best_val:
                best, best_val = u, val
        chosen.append(best)
        remaining.remove(best)
        out.append((best.name, float(best_val)))
    return out


def selection_to_csv(selection):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "unit", "objective"])
    for k, (name, val) in enumerate(selection, 1):
        w.writerow([k, name, repr(val)])
    return buf.getvalue()


def selection_to_json(selection):
    return json.dumps([{"unit": n, "objective": v} for n, v in selection], indent=1) + "\n"
