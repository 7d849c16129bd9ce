"""Wall-clock comparison of group importance against grouped permutation importance.

Everything runs in the calling thread (``workers=1``), so both methods are
timed under the same single-threaded regime.
"""

import csv
import io
import platform
import statistics
import time
from dataclasses import dataclass

import numpy as np

from gamgroup.baselines import grouped_permutation_importance
from gamgroup.data import FeatureGroup
from gamgroup.importance import group_importance


class BenchError(ValueError):
    pass


def machine_descriptor():
    return f"{platform.machine()} {platform.processor() or 'unknown-cpu'} python {platform.python_version()} numpy {np.__version__}"


@dataclass(frozen=True)
class BenchRecord:
    method: str  # "group_importance" or "gpi"
    n: int
    k: int
    repeats: int  # 0 for group_importance
    seconds: float  # median over runs
    runs: int
    machine: str


def timed(fn, runs):
    """Median wall time of ``runs`` calls after one untimed warm-up.

    Returns ``(median seconds, result of the warm-up call)``.
    """
    if int(runs) < 3:
        raise BenchError("timing_runs must be >= 3")
    result = fn()
    times = []
    for _ in range(int(runs)):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), result


def _members(model, group):
    if isinstance(group, FeatureGroup):
        members = group.members
    elif group == "all":
        members = model.feature_names
    else:
        members = tuple(group)
    if not members:
        raise BenchError("group is empty")
    return tuple(members)


def run_bench(dataset, model, group, gpi_repeats=10, timing_runs=5, metric="auc", seed=0):
    """Time both methods on identical inputs.

    Returns ``(ours, gpi, speedup)`` where ``speedup = gpi.seconds / ours.seconds``.
    ``group`` may be a FeatureGroup, a list of names, or ``"all"``.
    """
    members = _members(model, group)
    machine = machine_descriptor()
    t_ours, _ = timed(lambda: group_importance(model, dataset, members), timing_runs)
    t_gpi, _ = timed(
        lambda: grouped_permutation_importance(model, dataset, members, metric, gpi_repeats, seed),
        timing_runs,
    )
    k = len(members)
    ours = BenchRecord("group_importance", dataset.n, k, 0, t_ours, int(timing_runs), machine)
    gpi = BenchRecord("gpi", dataset.n, k, int(gpi_repeats), t_gpi, int(timing_runs), machine)
    return ours, gpi, t_gpi / t_ours


def loglog_fit(x, t):
    """Least-squares slope and R^2 of ``log t`` against ``log x``."""
    lx, lt = np.log(np.asarray(x, float)), np.log(np.asarray(t, float))
    slope, icpt = np.polyfit(lx, lt, 1)
    resid = lt - (slope * lx + icpt)
    ss_tot = float(((lt - lt.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


@dataclass(frozen=True)
class ScalingResult:
    n_records: tuple  # BenchRecord per n value, at k = fixed_k
    k_records: tuple  # BenchRecord per k value, at n = fixed_n
    n_slope: float
    n_r2: float
    k_slope: float
    k_r2: float


def scaling_probe(model, dataset, n_values, k_values, timing_runs=5, fixed_n=None, fixed_k=None):
    """Time ``group_importance`` across a grid of sample counts and group sizes.

    Sample counts above ``dataset.n`` are reached by tiling rows. Groups of
    size ``k`` are the first ``k`` model features. Each axis needs at least
    four distinct points for the log-log fit.
    """
    n_values = sorted({int(v) for v in n_values})
    k_values = sorted({int(v) for v in k_values})
    if len(n_values) < 4 or len(k_values) < 4:
        raise BenchError("need >= 4 points per axis")
    names = model.feature_names
    if k_values[0] < 1 or k_values[-1] > len(names):
        raise BenchError(f"k values must lie in 1..{len(names)}")
    if n_values[0] < 1:
        raise BenchError("n values must be positive")
    fixed_k = k_values[-1] if fixed_k is None else int(fixed_k)
    fixed_n = dataset.n if fixed_n is None else int(fixed_n)
    machine = machine_descriptor()

    def rows(n):
        return dataset if n == dataset.n else dataset.take(np.resize(np.arange(dataset.n), n))

    n_records = []
    for n in n_values:
        ds = rows(n)
        t, _ = timed(lambda: group_importance(model, ds, names[:fixed_k]), timing_runs)
        n_records.append(BenchRecord("group_importance", n, fixed_k, 0, t, int(timing_runs), machine))
    ds = rows(fixed_n)
    k_records = []
    for k in k_values:
        t, _ = timed(lambda: group_importance(model, ds, names[:k]), timing_runs)
        k_records.append(BenchRecord("group_importance", fixed_n, k, 0, t, int(timing_runs), machine))
    n_slope, n_r2 = loglog_fit(n_values, [r.seconds for r in n_records])
    k_slope, k_r2 = loglog_fit(k_values, [r.seconds for r in k_records])
    return ScalingResult(tuple(n_records), tuple(k_records), n_slope, n_r2, k_slope, k_r2)


def records_to_csv(records):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "n", "k", "repeats", "seconds"])
    for r in records:
        w.writerow([r.method, r.n, r.k, r.repeats, repr(r.seconds)])
    return buf.getvalue()
