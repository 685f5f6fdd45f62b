"""Chaos diagnostics: empirical measures, W1, factorization defects, rate fits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

MIN_REPLICAS = 30

# Fixed catalog so that sweeps stay comparable between runs.
TEST_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "v": lambda v: v,
    "v2": lambda v: v * v,
    "sin": np.sin,
    "tanh": np.tanh,
    "min1v2": lambda v: np.minimum(1.0, v * v),
}
TEST_FUNCTION_CATALOG_VERSION = 1

DELTA_LOG_FACTOR = math.log((2.0 + 2.0 * math.sqrt(2.0)) / (1.0 + 2.0 * math.sqrt(2.0)))


@dataclass(frozen=True)
class EmpiricalMeasure:
    sorted_samples: np.ndarray
    source: tuple = ()

    def __post_init__(self):
        x = np.sort(np.asarray(self.sorted_samples, dtype=float).ravel())
        if not np.all(np.isfinite(x)):
            raise ValueError("empirical measures need finite samples")
        object.__setattr__(self, "sorted_samples", x)

    def __len__(self):
        return len(self.sorted_samples)


def _as_measure(x) -> EmpiricalMeasure:
    return x if isinstance(x, EmpiricalMeasure) else EmpiricalMeasure(x)


def wasserstein1(a, b) -> float:
    """Exact W1 between two equal-size empirical measures on the line."""
    a, b = _as_measure(a), _as_measure(b)
    if len(a) != len(b):
        raise ValueError(f"W1 needs equal sample counts, got {len(a)} and {len(b)}")
    if len(a) == 0:
        raise ValueError("W1 of empty measures is undefined")
    return float(np.mean(np.abs(a.sorted_samples - b.sorted_samples)))


def _check_replicas(snapshots: np.ndarray) -> np.ndarray:
    snaps = np.asarray(snapshots, dtype=float)
    if snaps.ndim != 2:
        raise ValueError("snapshots must be a (replicas, N) array")
    if snaps.shape[0] < MIN_REPLICAS:
        raise ValueError(f"need at least {MIN_REPLICAS} replicas, got {snaps.shape[0]}")
    return snaps


def _jackknife(per_replica: np.ndarray, estimator: Callable[[np.ndarray], float]) -> tuple[float, float]:
    """Estimate and leave-one-replica-out standard error.

    ``per_replica`` has one row of statistics per replica; ``estimator`` maps
    the column means to the estimate.
    """
    r = per_replica.shape[0]
    total = per_replica.sum(axis=0)
    full = estimator(total / r)
    loo = np.array([estimator((total - row) / (r - 1)) for row in per_replica])
    se = math.sqrt((r - 1) / r * float(np.sum((loo - loo.mean()) ** 2)))
    return float(full), se


def chaos_defect(snapshots, phi: str = "v", psi: str = "v", symmetrize: bool = False) -> tuple[float, float]:
    """E[phi(v1) psi(v2)] - E[phi(v1)] E[psi(v2)] across replicas, with jackknife stderr.

    With ``symmetrize`` every ordered pair (i, j), i != j, of a replica stands
    in for (v1, v2); by exchangeability the estimand is unchanged.
    """
    snaps = _check_replicas(snapshots)
    f, g = TEST_FUNCTIONS[phi], TEST_FUNCTIONS[psi]
    fv, gv = f(snaps), g(snaps)
    if symmetrize:
        n = snaps.shape[1]
        sf, sg = fv.sum(axis=1), gv.sum(axis=1)
        pair = (sf * sg - np.sum(fv * gv, axis=1)) / (n * (n - 1))
        stats = np.column_stack([pair, sf / n, sg / n])
    else:
        stats = np.column_stack([fv[:, 0] * gv[:, 1], fv[:, 0], gv[:, 1]])
    return _jackknife(stats, lambda m: m[0] - m[1] * m[2])


def fluctuation_samples(snapshots, jhat) -> np.ndarray:
    """Per-replica N * (J(V) - jhat)**2; ``jhat`` may be a scalar or one value per replica."""
    snaps = np.asarray(snapshots, dtype=float)
    n = snaps.shape[1]
    return n * (snaps.mean(axis=1) - np.asarray(jhat, dtype=float)) ** 2


def current_fluctuation(snapshots, jhat) -> float:
    """N * E|J(V) - jhat|^2 over replicas; tends to Uhat - jhat**2 as N grows."""
    _check_replicas(snapshots)
    return float(np.mean(fluctuation_samples(snapshots, jhat)))


@dataclass(frozen=True)
class BoundConstants:
    delta_t: float
    n_of_t: int
    lambda_rate: float
    u_hat: float
    field: float
    horizon: float
    growth_factor: float  # exp(8 T sqrt(2 / Uhat))


def _exp_or_inf(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def theorem_bounds(u_hat: float, field: float, horizon: float) -> BoundConstants:
    """Structural constants of the energy-control and pathwise-coupling estimates."""
    if not (u_hat > 0 and field > 0 and horizon > 0):
        raise ValueError("u_hat, field and horizon must be positive")
    delta = math.sqrt(u_hat) / field * DELTA_LOG_FACTOR
    n_of_t = math.ceil(horizon / delta + 1.0)
    return BoundConstants(
        delta_t=delta,
        n_of_t=n_of_t,
        lambda_rate=4.0 * field / math.sqrt(u_hat),
        u_hat=u_hat,
        field=field,
        horizon=horizon,
        growth_factor=_exp_or_inf(8.0 * horizon * math.sqrt(2.0 / u_hat)),
    )


@dataclass(frozen=True)
class ScalingRow:
    n_particles: int
    metric: str
    mean: float
    stderr: float
    replicas: int


@dataclass
class ScalingTable:
    rows: list[ScalingRow] = field(default_factory=list)

    def add(self, n_particles: int, metric: str, mean: float, stderr: float, replicas: int) -> None:
        if stderr < 0:
            raise ValueError("stderr must be >= 0")
        prev = [r.n_particles for r in self.rows if r.metric == metric]
        if prev and n_particles <= prev[-1]:
            raise ValueError("n_particles must increase within a metric")
        self.rows.append(ScalingRow(int(n_particles), metric, float(mean), float(stderr), int(replicas)))

    def metric(self, name: str) -> list[ScalingRow]:
        return [r for r in self.rows if r.metric == name]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("N", "metric", "mean", "stderr", "replicas"))
            for r in self.rows:
                w.writerow((r.n_particles, r.metric, repr(r.mean), repr(r.stderr), r.replicas))


def fit_rate(table: ScalingTable, metric: str) -> tuple[float, float, float]:
    """OLS of log(mean) on log(N); returns (slope, intercept, r2)."""
    rows = table.metric(metric)
    if len({r.n_particles for r in rows}) < 3:
        raise ValueError(f"{metric}: need at least 3 distinct N values")
    if any(r.mean <= 0 for r in rows):
        raise ValueError(f"{metric}: means must be positive to take logs")
    if any(not r.stderr < r.mean / 3 for r in rows):
        raise ValueError(f"{metric}: every point needs stderr < mean/3")
    x = np.log([r.n_particles for r in rows])
    y = np.log([r.mean for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def write_fit_csv(path, fits: dict[str, tuple[float, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("metric", "slope", "intercept", "r2"))
        for name, (s, i, r2) in fits.items():
            w.writerow((name, repr(s), repr(i), repr(r2)))


def load_snapshots(directory, time_index: int) -> np.ndarray:
    """Read the engine's per-(replica, time) snapshot files into a (replicas, N) array."""
    files = sorted(Path(directory).glob(f"replica*_t{time_index:04d}.txt"))
    if not files:
        raise FileNotFoundError(f"no snapshots for time index {time_index} in {directory}")
    return np.array([np.loadtxt(f, ndmin=1) for f in files])
