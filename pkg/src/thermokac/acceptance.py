"""Built-in acceptance suite; each check returns a pass/fail line with its evidence."""

from __future__ import annotations

import filecmp
import itertools
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .core import InitialDistribution, MasterVector, SimConfig
from .diagnostics import (
    ScalingTable,
    chaos_defect,
    fit_rate,
    fluctuation_samples,
    theorem_bounds,
    wasserstein1,
)
from .engine import run_ensemble
from .flow import CurrentSolution, quenched_coefficients, quenched_flow, solve_current, thermostatted_flow

GAUSSIAN = InitialDistribution("gaussian", (0.0, 1.0))
# Starts at the quenched fixed point with Uhat = 0.01, where the 1/N defect of
# phi = psi = v is several standard errors above the R = 400 noise floor.
CHAOS_LAW = InitialDistribution("gaussian", (0.09, 0.0019))
# Mean 0.5, Uhat = 1: a nonzero current that decays at rate 2 when E = 0.
FLUCTUATION_LAW = InitialDistribution("gaussian", (0.5, 0.75))


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    limit: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.title}: {self.detail} ({self.seconds:.1f}s / {self.limit:g}s)"


def _grid(t_final: float, count: int) -> tuple[float, ...]:
    return tuple(float(x) for x in np.round(np.linspace(0.0, t_final, count), 12))


# -- individual criteria ------------------------------------------------------


def energy_conservation():
    cfg = SimConfig(1024, 1.0, 2.0, _grid(2.0, 21), GAUSSIAN, project_to_sphere=True, replicas=20, master_seed=101)
    res = run_ensemble(cfg, "interacting")
    drift = float(np.max(np.abs(res.column("U") - 1.0)))
    return drift <= 1e-8, f"max |U(t) - U(0)| / U(0) = {drift:.2e} (<= 1e-8)"


def _rhs_thermostat(field):
    def rhs(_, v):
        return field * (1.0 - (np.mean(v) / np.mean(v * v)) * v)

    return rhs


def _rhs_quenched(field, u_hat):
    # state = (Jhat, v_1..v_n)
    def rhs(_, y):
        j, v = y[0], y[1:]
        dj = field - field * j * j / u_hat - 2.0 * j
        return np.concatenate(([dj], field - field * j / u_hat * v))

    return rhs


def flow_oracle(cases: int = 100, seed: int = 7):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, 9))
        v = rng.normal(rng.uniform(-1, 1), rng.uniform(0.3, 2.0), n)
        field = float(rng.uniform(0.0, 4.0))
        dt = float(rng.uniform(0.0, 1.0))
        tol = dict(method="DOP853", rtol=1e-13, atol=1e-14)

        out = thermostatted_flow(MasterVector.of(v), dt, field).velocities
        ref = solve_ivp(_rhs_thermostat(field), (0.0, dt), v, **tol).y[:, -1]
        worst = max(worst, float(np.max(np.abs(out - ref))))

        u_hat = float(np.mean(v * v))
        j0 = float(np.mean(v))
        s = float(rng.uniform(0.0, 1.0))
        coeffs = quenched_coefficients(CurrentSolution("quenched", u_hat, field, j0), s, s + dt)
        out = quenched_flow(MasterVector.of(v), coeffs).velocities
        j_s = solve_ivp(_rhs_quenched(field, u_hat), (0.0, s), [j0], **tol).y[0, -1] if s > 0 else j0
        ref = solve_ivp(_rhs_quenched(field, u_hat), (s, s + dt), np.concatenate(([j_s], v)), **tol).y[1:, -1]
        worst = max(worst, float(np.max(np.abs(out - ref))))
    return worst <= 1e-9, f"{cases} cases, max componentwise error {worst:.2e} (<= 1e-9)"


def current_ode_consistency():
    cfg = SimConfig(512, 1.0, 2.0, (0.5, 1.0, 2.0), GAUSSIAN, project_to_sphere=True, replicas=200, master_seed=303)
    res = run_ensemble(cfg, "quenched")
    zs = []
    for k, t in enumerate(cfg.sample_times):
        jz = (res.mean[k, 0] - solve_current("quenched", 1.0, 1.0, 0.0, 0.0, t)) / res.stderr[k, 0]
        uz = (res.mean[k, 1] - 1.0) / res.stderr[k, 1]
        zs.append((t, jz, uz))
    ok = all(abs(jz) <= 3 and abs(uz) <= 3 for _, jz, uz in zs)
    detail = ", ".join(f"t={t:g}: zJ={jz:+.2f} zU={uz:+.2f}" for t, jz, uz in zs)
    return ok, detail


def chaos_rate(sweep=(32, 128, 512, 2048), replicas: int = 400, t: float = 0.5):
    table = ScalingTable()
    signs = []
    for n in sweep:
        cfg = SimConfig(n, 1.0, t, (t,), CHAOS_LAW, project_to_sphere=False, replicas=replicas, master_seed=404)
        snaps = run_ensemble(cfg, "quenched", snapshots=True).snapshots()[:, 0, :]
        d, se = chaos_defect(snaps, "v", "v", symmetrize=True)
        signs.append(np.sign(d))
        table.add(n, "defect", abs(d), se, replicas)
    try:
        slope, _, r2 = fit_rate(table, "defect")
    except ValueError as exc:
        return False, f"fit rejected: {exc}"
    ok = abs(slope + 1.0) <= 0.3 and r2 >= 0.9 and len(set(signs)) == 1
    pts = ", ".join(f"N={r.n_particles}: {r.mean:.2e}+-{r.stderr:.1e}" for r in table.rows)
    return ok, f"slope={slope:.3f} (-1 +- 0.3), r2={r2:.3f} (>= 0.9); {pts}"


def median_stderr(x: np.ndarray) -> float:
    # large-sample standard error of the median under approximate normality
    return math.sqrt(math.pi / 2.0) * float(np.std(x, ddof=1)) / math.sqrt(len(x))


def coupling_rate(sweep=(64, 256, 1024, 4096), replicas: int = 100):
    table = ScalingTable()
    medians = []
    for n in sweep:
        cfg = SimConfig(n, 1.0, 1.0, _grid(1.0, 21), GAUSSIAN, replicas=replicas, master_seed=505)
        sup = run_ensemble(cfg, "coupled").column("distance_N").max(axis=1)
        med = float(np.median(sup))
        medians.append(med)
        table.add(n, "sup_distance", med, median_stderr(sup), replicas)
    decreasing = all(b < a for a, b in zip(medians, medians[1:]))
    try:
        slope, _, r2 = fit_rate(table, "sup_distance")
    except ValueError as exc:
        return False, f"fit rejected: {exc}"
    pts = ", ".join(f"N={n}: {m:.4f}" for n, m in zip(sweep, medians))
    return decreasing and slope <= -0.20, f"strictly decreasing={decreasing}, slope={slope:.3f} (<= -0.20), r2={r2:.3f}; {pts}"


def moment_control():
    m6_0 = GAUSSIAN.raw_moment(6)
    worst = {}
    for process, project in (("quenched", False), ("interacting", True)):
        cfg = SimConfig(256, 1.0, 2.0, _grid(2.0, 21), GAUSSIAN, project_to_sphere=project, replicas=50, master_seed=606)
        worst[process] = float(np.max(run_ensemble(cfg, process).column("m6").mean(axis=0)))
    ok = all(math.isfinite(w) and w <= 50 * m6_0 for w in worst.values())
    return ok, f"m6(0)={m6_0:g}, max mean m6: " + ", ".join(f"{k}={v:.2f}" for k, v in worst.items()) + f" (<= {50 * m6_0:g})"


def fluctuation_identity(sizes=(256, 1024), replicas: int = 400):
    u_hat, j0 = FLUCTUATION_LAW.raw_moment(2), FLUCTUATION_LAW.raw_moment(1)
    parts, ok = [], True
    for n in sizes:
        cfg = SimConfig(
            n, 0.0, 1.0, (0.5, 1.0), FLUCTUATION_LAW, project_to_sphere=False, replicas=replicas,
            master_seed=707, quenched_init="distributional",
        )
        snaps = run_ensemble(cfg, "quenched", snapshots=True).snapshots()
        for k, t in enumerate(cfg.sample_times):
            jhat = solve_current("quenched", u_hat, 0.0, j0, 0.0, t)
            x = fluctuation_samples(snaps[:, k, :], jhat)
            target = u_hat - jhat * jhat
            z = (x.mean() - target) / (x.std(ddof=1) / math.sqrt(replicas))
            ok &= abs(z) <= 3
            parts.append(f"N={n} t={t:g}: {x.mean():.3f} vs {target:.3f} (z={z:+.2f})")
    return ok, "; ".join(parts)


def w1_exactness(instances: int = 1000, seed: int = 8):
    rng = np.random.default_rng(seed)
    perms = {n: np.array(list(itertools.permutations(range(n)))) for n in range(1, 7)}
    worst = 0.0
    for _ in range(instances):
        n = int(rng.integers(1, 7))
        a, b = rng.normal(size=n), rng.normal(size=n) * rng.uniform(0.1, 3)
        brute = float(np.min(np.abs(a[None, :] - b[perms[n]]).mean(axis=1)))
        worst = max(worst, abs(wasserstein1(a, b) - brute))
    return worst <= 1e-12, f"{instances} instances, max |sorted - brute force| = {worst:.1e}"


def bound_constants():
    b = theorem_bounds(1.0, 1.0, 1.0)
    ok = abs(b.delta_t - 0.232046) <= 1e-5 and b.n_of_t == 6
    return ok, f"delta_t={b.delta_t:.6f} (0.232046 +- 1e-5), n={b.n_of_t} (6)"


def _same_tree(a: Path, b: Path) -> bool:
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False
    return all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


DETERMINISM_RUNS = {
    "simulate": ["--set", "n_particles=64", "--set", "process=interacting", "--set", "snapshots=true"],
    "couple": ["--set", "n_particles=64"],
    "chaos-sweep": ["--replicas", "30", "--set", "sweep_n=16,32,64", "--set", "t_final=0.5", "--set", "sample_times=0.5"],
    "coupling-sweep": ["--set", "sweep_n=16,32,64"],
    "limit-check": ["--set", "n_particles=64"],
    "bounds": [],
}


def determinism():
    from .cli import main

    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        for sub, extra in DETERMINISM_RUNS.items():
            outs = []
            for run, threads in enumerate((1, 2)):
                out = Path(tmp) / f"{sub}-{run}"
                argv = [sub, "--out", str(out), "--seed", "11", "--replicas", "4", "--threads", str(threads), *extra]
                if main(argv) != 0:
                    bad.append(f"{sub} exited nonzero")
                outs.append(out)
            if not _same_tree(*outs):
                bad.append(f"{sub} outputs differ")
    return not bad, "byte-identical across runs and --threads 1/2" if not bad else "; ".join(bad)


CRITERIA: list[tuple[int, str, float, Callable[[], tuple[bool, str]]]] = [
    (1, "energy conservation (interacting)", 30.0, energy_conservation),
    (2, "flow vs integrator oracle", 10.0, flow_oracle),
    (3, "current ODE consistency", 120.0, current_ode_consistency),
    (4, "chaos rate 1/N", 600.0, chaos_rate),
    (5, "pathwise coupling decay", 600.0, coupling_rate),
    (6, "sixth moment control", 60.0, moment_control),
    (7, "current fluctuation identity", 120.0, fluctuation_identity),
    (8, "W1 exactness", 5.0, w1_exactness),
    (9, "energy-control constants", 1.0, bound_constants),
    (10, "determinism", 60.0, determinism),
]


def run_criterion(number: int) -> CriterionResult:
    for num, title, limit, check in CRITERIA:
        if num == number:
            start = time.perf_counter()
            ok, detail = check()
            elapsed = time.perf_counter() - start
            return CriterionResult(num, title, bool(ok) and elapsed < limit, detail, elapsed, limit)
    raise KeyError(f"no acceptance criterion {number}")


def run_all(numbers=None, echo: Callable[[str], None] | None = print) -> list[CriterionResult]:
    results = []
    for num, *_ in CRITERIA:
        if numbers and num not in numbers:
            continue
        r = run_criterion(num)
        if echo:
            echo(r.line())
        results.append(r)
    return results
