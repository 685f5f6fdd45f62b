"""Command-line entry point: ``thermokac <subcommand> [options]``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .acceptance import median_stderr
from .core import ConfigError
from .diagnostics import MIN_REPLICAS, ScalingTable, chaos_defect, fit_rate, theorem_bounds, write_fit_csv
from .engine import ReplicaError, run_ensemble
from .flow import solve_current
from .output import (
    OutputExistsError,
    atomic_directory,
    write_ensemble_csv,
    write_manifest,
    write_rows,
    write_snapshots,
    write_summary_csv,
)

SUBCOMMANDS = ("simulate", "couple", "chaos-sweep", "coupling-sweep", "limit-check", "bounds", "acceptance")


@dataclass
class ExperimentPlan:
    subcommand: str
    config_path: str | None
    output_dir: str | None
    overrides: list[str] = field(default_factory=list)
    threads: int = 1
    force: bool = False
    only: tuple[int, ...] = ()


def _overrides(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(item, "--set expects key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _simulate(settings, out: Path, threads: int):
    res = run_ensemble(settings.sim, settings.process, threads, snapshots=settings.snapshots)
    write_ensemble_csv(out / "trajectory.csv", res)
    write_summary_csv(out / "summary.csv", res)
    if settings.snapshots:
        write_snapshots(out / "snapshots", res.snapshots())


def _couple(settings, out: Path, threads: int):
    res = run_ensemble(settings.sim, "coupled", threads, snapshots=settings.snapshots)
    write_ensemble_csv(out / "coupled.csv", res)
    write_summary_csv(out / "summary.csv", res)
    sup = res.column("distance_N").max(axis=1)
    write_rows(out / "sup_distance.csv", ("replica", "sup_distance_N"), [(r, float(x)) for r, x in enumerate(sup)])
    if settings.snapshots:
        write_snapshots(out / "snapshots" / "interacting", res.snapshots("interacting"))
        write_snapshots(out / "snapshots" / "quenched", res.snapshots("quenched"))


def _fit_all(table: ScalingTable, metrics) -> dict:
    fits = {}
    for m in metrics:
        try:
            fits[m] = fit_rate(table, m)
        except ValueError as exc:
            print(f"warning: no fit for {m}: {exc}", file=sys.stderr)
            fits[m] = (float("nan"),) * 3
    return fits


def _chaos_sweep(settings, out: Path, threads: int):
    if settings.sim.replicas < MIN_REPLICAS:
        raise ConfigError("replicas", f"chaos-sweep needs at least {MIN_REPLICAS} replicas")
    table = ScalingTable()
    rows, metrics = [], []
    for n in settings.sweep_n:
        s = settings.with_n(n)
        snaps = run_ensemble(s.sim, s.process, threads, snapshots=True).snapshots()
        for k, t in enumerate(s.sim.sample_times):
            d, se = chaos_defect(snaps[:, k, :], s.phi, s.psi, symmetrize=s.symmetrize)
            rows.append((n, t, s.phi, s.psi, d, se))
            metric = f"defect[{s.phi},{s.psi}]@t={t!r}"
            if metric not in metrics:
                metrics.append(metric)
            table.add(n, metric, abs(d), se, s.sim.replicas)
    write_rows(out / "chaos.csv", ("N", "t", "phi", "psi", "defect", "stderr"), rows)
    table.write_csv(out / "scaling.csv")
    write_fit_csv(out / "fit.csv", _fit_all(table, [m for m in metrics if not m.endswith("@t=0.0")]))


def _coupling_sweep(settings, out: Path, threads: int):
    table = ScalingTable()
    for n in settings.sweep_n:
        s = settings.with_n(n)
        res = run_ensemble(s.sim, "coupled", threads)
        sup = res.column("distance_N").max(axis=1)
        w1 = res.column("W1")[:, -1]
        r = s.sim.replicas
        table.add(n, "median_sup_distance", float(np.median(sup)), median_stderr(sup) if r > 1 else 0.0, r)
        table.add(n, "mean_sup_distance", float(np.mean(sup)), float(np.std(sup, ddof=1) / np.sqrt(r)) if r > 1 else 0.0, r)
        table.add(n, "mean_w1_final", float(np.mean(w1)), float(np.std(w1, ddof=1) / np.sqrt(r)) if r > 1 else 0.0, r)
    table.write_csv(out / "scaling.csv")
    write_fit_csv(out / "fit.csv", _fit_all(table, list(dict.fromkeys(row.metric for row in table.rows))))


def _limit_check(settings, out: Path, threads: int):
    sim = settings.sim
    res = run_ensemble(sim, settings.process, threads)
    dist = sim.initial_distribution
    m1, m2 = dist.raw_moment(1), dist.raw_moment(2)
    if sim.projection_for(settings.process):
        m1, m2 = m1 / np.sqrt(m2), 1.0
    rows = []
    for k, t in enumerate(sim.sample_times):
        zeta = solve_current("quenched", m2, sim.field_strength, m1, 0.0, t)
        mj, sj = float(res.mean[k, 0]), float(res.stderr[k, 0])
        mu, su = float(res.mean[k, 1]), float(res.stderr[k, 1])
        z = (mj - zeta) / sj if sj > 0 else float("nan")
        rows.append((t, mj, sj, zeta, z, mu, su, float(m2)))
    write_rows(out / "limit.csv", ("time", "mean_J", "stderr_J", "zeta", "z", "mean_U", "stderr_U", "u_hat"), rows)


def _bounds(settings, out: Path | None):
    b = theorem_bounds(settings.u_hat, settings.sim.field_strength, settings.sim.t_final)
    fields = ("delta_t", "n_of_t", "lambda_rate", "u_hat", "field", "horizon", "growth_factor")
    for f in fields:
        print(f"{f}={getattr(b, f)!r}")
    if out is not None:
        write_rows(out / "bounds.csv", fields, [tuple(getattr(b, f) for f in fields)])


def _acceptance(plan: ExperimentPlan, out: Path | None) -> bool:
    from .acceptance import run_all

    results = run_all(plan.only or None)
    if out is not None:
        write_rows(
            out / "acceptance.csv",
            ("criterion", "title", "passed", "seconds", "detail"),
            [(r.number, r.title, r.passed, round(r.seconds, 3), r.detail) for r in results],
        )
    return all(r.passed for r in results)


RUNNERS = {
    "simulate": _simulate,
    "couple": _couple,
    "chaos-sweep": _chaos_sweep,
    "coupling-sweep": _coupling_sweep,
    "limit-check": _limit_check,
}


def run(plan: ExperimentPlan) -> int:
    """Execute one plan; returns the process exit status."""
    try:
        settings = cfgmod.load(plan.config_path, _overrides(plan.overrides))
        if plan.subcommand in RUNNERS and plan.output_dir is None:
            raise ConfigError("--out", f"{plan.subcommand} needs an output directory")
        if plan.output_dir is None:
            if plan.subcommand == "bounds":
                _bounds(settings, None)
                return 0
            return 0 if _acceptance(plan, None) else 1
        with atomic_directory(plan.output_dir, plan.force) as out:
            ok = True
            if plan.subcommand in RUNNERS:
                RUNNERS[plan.subcommand](settings, out, plan.threads)
            elif plan.subcommand == "bounds":
                _bounds(settings, out)
            else:
                ok = _acceptance(plan, out)
            write_manifest(out / "manifest.txt", plan.subcommand, settings.echo(), settings.sim.master_seed, __version__)
        return 0 if ok else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OutputExistsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ReplicaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thermokac", description="Thermostatted Kac process simulator and chaos diagnostics.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int, metavar="U64")
        sp.add_argument("--replicas", type=int, metavar="R")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1, metavar="K")
        sp.add_argument("--force", action="store_true")
        sp.add_argument("--set", action="append", default=[], metavar="key=value", dest="overrides")
        if name == "acceptance":
            sp.add_argument("--only", type=int, nargs="*", default=[], metavar="N")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    # flags win over --set, which wins over the file
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if args.replicas is not None:
        overrides.append(f"replicas={args.replicas}")
    plan = ExperimentPlan(
        args.subcommand,
        args.config,
        args.out,
        overrides,
        threads=max(1, args.threads),
        force=args.force,
        only=tuple(getattr(args, "only", ()) or ()),
    )
    return run(plan)


if __name__ == "__main__":
    sys.exit(main())
