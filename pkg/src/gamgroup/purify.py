"""Move pair-surface mass into main effects (functional-ANOVA purification).

For each pair surface, weighted row means are subtracted and added to the
row feature's shape function, then weighted column means are subtracted and
added to the column feature's shape function; sweeps repeat until every row
and column mean is below ``tol``. Finally all main effects are re-centered
into the intercept. The model's prediction for every sample is unchanged.
"""

import numpy as np

from gamgroup.binning import BinMap, apply_bins
from gamgroup.model import ShapeFunction

TOL = 1e-9
MAX_SWEEPS = 100


def _refine(shape, coarse):
    """Re-express ``shape`` on the union of its cuts and ``coarse``'s cuts."""
    fine = shape.bins.cuts_array
    extra = np.setdiff1d(coarse.cuts_array, fine)
    if extra.size == 0:
        return shape
    union = np.union1d(fine, extra)
    old = shape.contributions
    # each new value bin sits inside exactly one old value bin
    lower_edges = union
    old_idx = np.concatenate([[0], np.searchsorted(fine, lower_edges, side="right")])
    contrib = np.concatenate([old[old_idx], [old[-1]]])
    max_bins = max(shape.bins.max_bins, union.size + 1)
    return ShapeFunction(shape.name, BinMap(tuple(union), max_bins, shape.bins.has_missing_bin), contrib)


def fine_to_coarse(fine, coarse):
    """Coarse bin index for every bin of ``fine`` (whose cuts contain ``coarse``'s)."""
    edges = np.concatenate([[-np.inf], fine.cuts_array])
    idx = np.searchsorted(coarse.cuts_array, edges, side="right")
    return np.concatenate([idx, [coarse.missing_bin]])


def _weighted_means(matrix, mass, axis):
    total = mass.sum(axis=axis)
    num = (mass * matrix).sum(axis=axis)
    return np.divide(num, total, out=np.zeros_like(num), where=total > 0)


def purify_matrix(matrix, mass, tol=TOL, max_sweeps=MAX_SWEEPS):
    """Purify one surface under cell weights ``mass``.

    Returns ``(purified, row_effect, col_effect, sweeps)`` with
    ``matrix == purified + row_effect[:, None] + col_effect[None, :]``.
    """
    m = np.array(matrix, dtype=np.float64)
    mass = np.asarray(mass, dtype=np.float64)
    rows = np.zeros(m.shape[0])
    cols = np.zeros(m.shape[1])
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        r = _weighted_means(m, mass, 1)
        m -= r[:, None]
        rows += r
        c = _weighted_means(m, mass, 0)
        m -= c[None, :]
        cols += c
        # column means are ~0 right after their subtraction; rows may drift
        if np.abs(_weighted_means(m, mass, 1)).max(initial=0.0) < tol:
            break
    return m, rows, cols, sweeps


def purify_pairs(model, dataset, tol=TOL, max_sweeps=MAX_SWEEPS):
    """Return an equivalent model whose pair surfaces have zero row/column means.

    Means are weighted by the sample weights of ``dataset`` falling into each
    cell. Main effects absorb the removed mass and are then zero-centered
    over ``dataset`` with the offset going to the intercept.
    """
    if not model.pairs:
        return model
    shapes = {s.name: s for s in model.shapes}
    w = dataset.weights
    new_pairs = []
    for pair in model.pairs:
        a = apply_bins(pair.bins_i, dataset.column(pair.i))
        b = apply_bins(pair.bins_j, dataset.column(pair.j))
        nb = pair.bins_j.n_bins
        mass = np.bincount(a * nb + b, w, minlength=pair.matrix.size).reshape(pair.matrix.shape)
        pure, row_eff, col_eff, _ = purify_matrix(pair.matrix, mass, tol, max_sweeps)

        for name, coarse, effect in ((pair.i, pair.bins_i, row_eff), (pair.j, pair.bins_j, col_eff)):
            shape = _refine(shapes[name], coarse)
            mapping = fine_to_coarse(shape.bins, coarse)
            shapes[name] = ShapeFunction(name, shape.bins, shape.contributions + effect[mapping])
        new_pairs.append(type(pair)(pair.i, pair.j, pair.bins_i, pair.bins_j, pure))

    intercept = model.intercept
    total = w.sum()
    centered = []
    for s in model.shapes:
        shape = shapes[s.name]
        idx = apply_bins(shape.bins, dataset.column(s.name))
        mean = float(np.dot(np.bincount(idx, w, minlength=shape.bins.n_bins), shape.contributions) / total)
        centered.append(ShapeFunction(s.name, shape.bins, shape.contributions - mean))
        intercept += mean
    return model.replace(intercept=intercept, shapes=tuple(centered), pairs=tuple(new_pairs))
