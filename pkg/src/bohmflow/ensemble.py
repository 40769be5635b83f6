"""Trajectory ensembles, entanglement sweeps, and ergodicity colorplots.

Ensembles are embarrassingly parallel: each grid point integrates with
deviation tracking in a worker thread (the compiled kernels release the
GIL), results are collected in grid order, so output is deterministic and
independent of the worker count.
"""

import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .analysis import CLASSIFY_FLOOR, classify_trajectory, lcn_series
from .errors import GridMismatch, TooFewSamples
from .integrate import integrate_with_deviation
from .models import OscillatorFrequencies, make_two_qubit

WORKERS_ENV = "BOHMFLOW_WORKERS"


def worker_count(n_workers=None):
    if n_workers is not None:
        return max(1, int(n_workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class GridSpec:
    """Initial-condition grid: uniform lattice or seeded uniform-random."""

    x_range: Tuple[float, float] = (-4.0, 4.0)
    y_range: Tuple[float, float] = (-4.0, 4.0)
    n_x: int = 20
    n_y: int = 20
    sampling: str = "uniform-grid"
    seed: int = 0

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("grid counts must be positive")
        if self.sampling not in ("uniform-grid", "uniform-random"):
            raise ValueError(f"unknown sampling {self.sampling!r}")

    def points(self):
        """(n_x*n_y, 2) array of initial conditions, deterministic order."""
        if self.sampling == "uniform-random":
            rng = np.random.default_rng(self.seed)
            pts = np.empty((self.n_x * self.n_y, 2))
            pts[:, 0] = rng.uniform(*self.x_range, size=len(pts))
            pts[:, 1] = rng.uniform(*self.y_range, size=len(pts))
            return pts
        xs = np.linspace(*self.x_range, self.n_x)
        ys = np.linspace(*self.y_range, self.n_y)
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


@dataclass(eq=False)
class EnsembleRow:
    index: int
    x0: float
    y0: float
    status: str
    classification: str
    chi_checkpoints: Tuple[float, ...]
    final_chi: float


@dataclass(eq=False)
class EnsembleTable:
    rows: List[EnsembleRow]
    checkpoints: Tuple[float, ...]
    model: object = None
    controls: object = None
    grid: Optional[GridSpec] = None

    def chaotic_chis(self, checkpoint):
        j = self.checkpoints.index(checkpoint)
        return np.array([r.chi_checkpoints[j] for r in self.rows
                         if r.classification == "chaotic"])

    def fraction(self, label):
        return sum(r.classification == label for r in self.rows) / len(self.rows)


def _one_trajectory(model, x0, y0, controls, checkpoints, window, floor):
    rec = integrate_with_deviation(model, x0, y0, controls)
    if rec.stretching is None or len(rec.stretching) == 0:
        return rec.status, "undecided", tuple(math.nan for _ in checkpoints), math.nan
    lcn = lcn_series(rec.stretching, controls.renorm_dt)
    chis = []
    for tc in checkpoints:
        i = min(int(round(tc / controls.renorm_dt)) - 1, len(lcn.chi) - 1)
        chis.append(float(lcn.chi[i]) if i >= 0 else math.nan)
    if rec.status == "completed":
        label = classify_trajectory(lcn, window=window, floor=floor)
    else:
        label = "undecided"
    return rec.status, label, tuple(chis), lcn.final_chi


def run_ensemble(model, grid, controls, checkpoints, n_workers=None,
                 class_window=None, class_floor=CLASSIFY_FLOOR):
    """Integrate every grid point with deviation tracking.

    Records chi at each checkpoint time plus the final ordered/chaotic
    verdict per row.  Row order follows the grid regardless of scheduling;
    stalled rows are kept with their status.
    """
    checkpoints = tuple(float(c) for c in checkpoints)
    if any(c > controls.t_final + 1e-9 for c in checkpoints):
        raise ValueError("checkpoints must not exceed t_final")
    pts = grid.points()
    jobs = (delayed(_one_trajectory)(model, float(x), float(y), controls,
                                     checkpoints, class_window, class_floor)
            for x, y in pts)
    results = Parallel(n_jobs=worker_count(n_workers), prefer="threads")(jobs)
    rows = [EnsembleRow(index=i, x0=float(pts[i, 0]), y0=float(pts[i, 1]),
                        status=res[0], classification=res[1],
                        chi_checkpoints=res[2], final_chi=res[3])
            for i, res in enumerate(results)]
    return EnsembleTable(rows=rows, checkpoints=checkpoints, model=model,
                         controls=controls, grid=grid)


@dataclass(eq=False)
class LcnDistribution:
    mean: float
    std_dev: float
    skewness: float
    excess_kurtosis: float
    normality_statistic: float
    histogram: Tuple[np.ndarray, np.ndarray]  # (bin_edges, probability mass)
    n: int


def lcn_distribution(table, checkpoint, min_rows=30):
    """Moments and histogram of chi over the chaotic rows at a checkpoint.

    The Anderson-Darling statistic against a fitted normal is reported as a
    descriptive quantity, not asserted against a threshold.
    """
    x = table.chaotic_chis(checkpoint)
    if x.size < min_rows:
        raise TooFewSamples(f"{x.size} chaotic rows < {min_rows}")
    n_bins = max(10, int(round(math.sqrt(x.size))))
    counts, edges = np.histogram(x, bins=n_bins)
    mass = counts / counts.sum()
    return LcnDistribution(
        mean=float(np.mean(x)),
        std_dev=float(np.std(x, ddof=1)),
        skewness=float(stats.skew(x, bias=False)),
        excess_kurtosis=float(stats.kurtosis(x, bias=False)),
        normality_statistic=float(stats.anderson(x, "norm").statistic),
        histogram=(edges, mass),
        n=int(x.size))


@dataclass(eq=False)
class SweepRow:
    c2: float
    n_rows: int
    n_chaotic: int
    fraction_chaotic: float
    mean_chi: float
    std_chi: float
    delta_chi: float
    mean_chi_checkpoints: Tuple[float, ...]


def entanglement_sweep(c2_values, grid, controls, checkpoints, a0=2.5,
                       frequencies=None, n_workers=None,
                       class_floor=CLASSIFY_FLOOR):
    """Ensemble statistics per entanglement amplitude c2.

    delta_chi is the spread max-min of chi over chaotic rows at the final
    checkpoint, the finite-time convergence measure; mean/std are over
    chaotic rows only.
    """
    if frequencies is None:
        frequencies = OscillatorFrequencies(1.0, math.sqrt(3.0))
    out = []
    for c2 in c2_values:
        model = make_two_qubit(float(c2), a0=a0, frequencies=frequencies)
        table = run_ensemble(model, grid, controls, checkpoints,
                             n_workers=n_workers, class_floor=class_floor)
        last = checkpoints[-1]
        chis = table.chaotic_chis(last)
        means = []
        for cp in checkpoints:
            cc = table.chaotic_chis(cp)
            means.append(float(np.mean(cc)) if cc.size else math.nan)
        out.append(SweepRow(
            c2=float(c2), n_rows=len(table.rows), n_chaotic=int(chis.size),
            fraction_chaotic=float(chis.size / len(table.rows)),
            mean_chi=float(np.mean(chis)) if chis.size else math.nan,
            std_chi=float(np.std(chis, ddof=1)) if chis.size > 1 else math.nan,
            delta_chi=float(np.max(chis) - np.min(chis)) if chis.size else math.nan,
            mean_chi_checkpoints=tuple(means)))
    return out


@dataclass(eq=False)
class ColorplotGrid:
    """Occupancy histogram on a square bin grid.

    ``counts[i, j]`` counts samples with x in bin i and y in bin j;
    out-of-region samples land in the ``overflow`` sentinel, so
    counts.sum() + overflow == total_samples.
    """

    region: Tuple[float, float]
    bin_size: float
    counts: np.ndarray
    overflow: int
    total_samples: int


def colorplot(record, region=(-6.0, 6.0), bin_size=0.05, sample_dt=0.05,
              t_max=None):
    """Bin trajectory samples at cadence ``sample_dt`` into a square grid.

    The record's own sampling interval must divide ``sample_dt``; passing
    ``t_max`` restricts to the samples with t <= t_max (used to compare
    occupancy at several durations).
    """
    lo, hi = region
    if bin_size <= 0 or hi <= lo:
        raise ValueError("need hi > lo and positive bin_size")
    dt = record.controls.dt_sample
    stride = sample_dt / dt
    if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
        raise ValueError("sample_dt must be an integer multiple of the "
                         "record's dt_sample")
    pos = record.positions[::int(round(stride))]
    tt = record.times[::int(round(stride))]
    if t_max is not None:
        pos = pos[tt <= t_max + 1e-12]
    pos = pos[np.all(np.isfinite(pos), axis=1)]
    n = int(round((hi - lo) / bin_size))
    ix = np.floor((pos[:, 0] - lo) / bin_size).astype(int)
    iy = np.floor((pos[:, 1] - lo) / bin_size).astype(int)
    inside = (ix >= 0) & (ix < n) & (iy >= 0) & (iy < n)
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (ix[inside], iy[inside]), 1)
    return ColorplotGrid(region=(lo, hi), bin_size=bin_size, counts=counts,
                         overflow=int((~inside).sum()),
                         total_samples=int(len(pos)))


def frobenius_distance(g1, g2):
    """Frobenius distance between probability-normalized occupancy grids.

    Each count matrix is divided by its own total sample count (overflow
    included in the denominator), so runs of equal duration compare fairly
    and the result is invariant to the absolute number of samples.
    """
    if g1.region != g2.region or g1.bin_size != g2.bin_size:
        raise GridMismatch("colorplots have different region or bin size")
    if g1.total_samples == 0 or g2.total_samples == 0:
        raise ValueError("empty colorplot")
    p1 = g1.counts / g1.total_samples
    p2 = g2.counts / g2.total_samples
    return float(np.sqrt(np.sum((p1 - p2) ** 2)))
