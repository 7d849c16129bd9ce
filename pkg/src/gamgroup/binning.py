"""Quantile binning of numeric features.

A value ``v`` lands in bin ``#{c in cuts : c <= v}``; ``NaN`` lands in an
extra missing bin whose index is ``len(cuts) + 1``. Cut points always sit
strictly above one distinct training value and at or below the next, so the
assignment of training values to bins depends only on their order. That is
what makes a fitted model invariant to strictly increasing transforms of a
feature.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_BINS = 256


class BinningError(ValueError):
    pass


@dataclass(frozen=True)
class BinMap:
    """Fitted cut points for one feature."""

    cuts: tuple
    max_bins: int = DEFAULT_MAX_BINS
    has_missing_bin: bool = True

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        if not all(np.isfinite(cuts)):
            raise BinningError("cut points must be finite")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise BinningError("cut points must be strictly increasing")
        if len(cuts) > max(self.max_bins - 1, 0):
            raise BinningError(f"{len(cuts)} cuts exceed max_bins={self.max_bins}")
        object.__setattr__(self, "cuts", cuts)
        object.__setattr__(self, "_cuts_array", np.array(cuts, dtype=np.float64))

    @property
    def n_value_bins(self):
        return len(self.cuts) + 1

    @property
    def missing_bin(self):
        return len(self.cuts) + 1

    @property
    def n_bins(self):
        """Value bins plus the missing bin."""
        return len(self.cuts) + 2

    @property
    def cuts_array(self):
        return self._cuts_array

    def representatives(self):
        """One value inside each value bin (midpoints; outer bins offset by one)."""
        c = self._cuts_array
        if c.size == 0:
            return np.array([0.0])
        inner = (c[:-1] + c[1:]) / 2
        return np.concatenate([[c[0] - 1.0], inner, [c[-1]]])


def _cut_between(a, b):
    """A float in (a, b]."""
    mid = a + (b - a) / 2
    if not a < mid <= b:
        mid = b
    return mid


def fit_bins(column, max_bins=DEFAULT_MAX_BINS, weights=None):
    """Fit equal-frequency cut points for one feature column.

    Parameters
    ----------
    column : array-like
        Feature values; ``NaN`` is treated as missing and ignored.
    max_bins : int
        Upper bound on the number of value bins (``>= 2``).
    weights : array-like, optional
        Sample weights used for the quantiles.

    Returns
    -------
    BinMap
        With ``d - 1`` midpoint cuts when the column has ``d <= max_bins``
        distinct finite values, otherwise cuts placed between distinct values
        at the (weighted) ``k / max_bins`` quantiles.
    """
    max_bins = int(max_bins)
    if max_bins < 2:
        raise BinningError("max_bins must be at least 2")
    col = np.asarray(column, dtype=np.float64)
    if col.size == 0:
        raise BinningError("column is empty")
    w = np.ones(col.shape) if weights is None else np.asarray(weights, dtype=np.float64)
    missing = np.isnan(col)
    finite = np.isfinite(col)
    if not finite.any():
        raise BinningError("feature has no finite values")
    values, inverse = np.unique(col[finite], return_inverse=True)
    has_missing = bool(missing.any())

    if values.size <= max_bins:
        cuts = [_cut_between(a, b) for a, b in zip(values[:-1], values[1:])]
        return BinMap(tuple(cuts), max_bins, has_missing)

    mass = np.bincount(inverse, weights=w[finite], minlength=values.size)
    cum = np.cumsum(mass)
    total = cum[-1]
    if total <= 0:
        # all weight zero: fall back to counts
        cum = np.cumsum(np.bincount(inverse, minlength=values.size)).astype(np.float64)
        total = cum[-1]
    # A cut after distinct index s leaves cum[s] of the mass below it.
    splits = []
    for k in range(1, max_bins):
        target = total * k / max_bins
        s = int(np.searchsorted(cum[:-1], target))
        # nearest of the two candidate split points around the target
        if s > 0 and (s >= cum.size - 1 or abs(cum[s - 1] - target) <= abs(cum[s] - target)):
            s -= 1
        s = min(s, cum.size - 2)
        if not splits or s > splits[-1]:
            splits.append(s)
    cuts = [_cut_between(values[s], values[s + 1]) for s in splits]
    return BinMap(tuple(cuts), max_bins, has_missing)


def apply_bins(bin_map, values):
    """Map values to bin indices. Scalars give an int, arrays an int array.

    Values outside the training range clamp to the first or last value bin;
    ``NaN`` maps to ``bin_map.missing_bin``.
    """
    v = np.asarray(values, dtype=np.float64)
    idx = np.searchsorted(bin_map.cuts_array, v, side="right")
    idx = np.where(np.isnan(v), bin_map.missing_bin, idx)
    if idx.ndim == 0:
        return int(idx)
    return idx.astype(np.intp, copy=False)


def coarsen(bin_map, bin_mass, max_bins):
    """Pick a subset of ``bin_map``'s cuts giving at most ``max_bins`` bins.

    Used for pair terms, so that every fine bin lies inside exactly one coarse
    bin. ``bin_mass`` holds the training mass of each value bin.
    """
    cuts = bin_map.cuts_array
    if cuts.size + 1 <= max_bins:
        return BinMap(bin_map.cuts, max_bins, bin_map.has_missing_bin)
    cum = np.cumsum(np.asarray(bin_mass, dtype=np.float64)[: cuts.size + 1])
    total = cum[-1]
    if total <= 0:
        cum = np.arange(1, cuts.size + 2, dtype=np.float64)
        total = cum[-1]
    chosen = []
    for k in range(1, max_bins):
        target = total * k / max_bins
        s = int(np.searchsorted(cum[:-1], target))
        if s > 0 and (s >= cuts.size or abs(cum[s - 1] - target) <= abs(cum[s] - target)):
            s -= 1
        s = min(s, cuts.size - 1)
        if not chosen or s > chosen[-1]:
            chosen.append(s)
    return BinMap(tuple(cuts[s] for s in chosen), max_bins, bin_map.has_missing_bin)
