"""CSV, snapshot and manifest writers plus atomic output directories."""

from __future__ import annotations

import contextlib
import csv
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .engine import COUPLED_FIELDS, TRAJECTORY_FIELDS, EnsembleResult, sample_row


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_ensemble_csv(path, result: EnsembleResult) -> None:
    """Trajectory or coupled CSV, one row per (replica, sample time)."""
    fields = COUPLED_FIELDS if result.mode == "coupled" else TRAJECTORY_FIELDS
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("replica", "time", *fields))
        for r, traj in enumerate(result.trajectories):
            for s in traj:
                w.writerow((r, repr(s.time), *(repr(float(x)) for x in sample_row(s))))


def write_summary_csv(path, result: EnsembleResult) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(("time", *(f"{f}_{stat}" for f in result.fields for stat in ("mean", "stderr")), "replicas"))
        for k, t in enumerate(result.times):
            cells = []
            for c in range(len(result.fields)):
                cells += [repr(float(result.mean[k, c])), repr(float(result.stderr[k, c]))]
            w.writerow((repr(t), *cells, result.replicas))


def write_snapshots(directory, snapshots: np.ndarray) -> None:
    """One plain-text column of N velocities per (replica, sample time)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for r, per_time in enumerate(snapshots):
        for k, v in enumerate(per_time):
            np.savetxt(directory / f"replica{r:05d}_t{k:04d}.txt", v, fmt="%.17g")


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def write_manifest(path, subcommand: str, settings_echo: str, master_seed: int, version: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"tool=thermokac {version}\n")
        fh.write(f"subcommand={subcommand}\n")
        fh.write(f"master_seed={master_seed}\n")
        fh.write("[config]\n")
        fh.write(settings_echo)


class OutputExistsError(FileExistsError):
    pass


@contextlib.contextmanager
def atomic_directory(target, force: bool = False):
    """Yield a scratch directory that replaces ``target`` only on success."""
    target = Path(target)
    if target.exists():
        if not target.is_dir():
            raise OutputExistsError(f"{target} exists and is not a directory")
        if any(target.iterdir()) and not force:
            raise OutputExistsError(f"{target} is not empty (use --force to overwrite)")
    target.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        yield scratch
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    scratch.chmod(0o755)
    if target.exists():
        shutil.rmtree(target)
    os.replace(scratch, target)
