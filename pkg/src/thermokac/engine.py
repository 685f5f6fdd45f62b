"""Event-driven simulation of the thermostatted and quenched Kac processes."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .collision import CollisionHistory
from .core import (
    CACHE_REFRESH_INTERVAL,
    DegenerateStateError,
    MasterVector,
    RngStreamKey,
    SimConfig,
    StreamTag,
    sample_initial_state,
)
from .flow import DAMPING, segment, solve_current

# Materialise the lazy map once its scale leaves this band.
_SCALE_BAND = (1e-4, 1e4)


@dataclass
class TrajectorySample:
    time: float
    j_value: float
    u_value: float
    moments: tuple[float, float, float]
    snapshot: np.ndarray | None = field(default=None, repr=False)


@dataclass
class CoupledSample:
    time: float
    distance_n: float
    j_interacting: float
    j_quenched: float
    u_interacting: float
    u_quenched: float
    jhat_ode: float
    w1: float = 0.0  # W1 between the two empirical measures
    snapshot_interacting: np.ndarray | None = field(default=None, repr=False)
    snapshot_quenched: np.ndarray | None = field(default=None, repr=False)


class ReplicaError(RuntimeError):
    def __init__(self, replica: int, keys: tuple[RngStreamKey, ...], cause: BaseException):
        super().__init__(f"replica {replica} failed ({cause!r}); replay keys: {keys}")
        self.replica = replica
        self.keys = keys


def _observe(v: np.ndarray, t: float, keep: bool) -> TrajectorySample:
    v2 = v * v
    m2 = float(np.mean(v2))
    m4 = float(np.mean(v2 * v2))
    m6 = float(np.mean(v2 * v2 * v2))
    return TrajectorySample(t, float(np.mean(v)), m2, (m2, m4, m6), v.copy() if keep else None)


class LazyState:
    """Velocities stored as v_i = scale * w_i + shift.

    Flow segments only compose into (scale, shift); a collision materialises
    the two touched coordinates. Sums of w and w**2 are maintained
    incrementally and rebuilt every ``CACHE_REFRESH_INTERVAL`` events.
    """

    __slots__ = ("w", "n", "scale", "shift", "sum_w", "sum_w2", "_count")

    def __init__(self, velocities):
        self.w = [float(x) for x in velocities]
        self.n = len(self.w)
        self.scale = 1.0
        self.shift = 0.0
        self._rebuild()

    def _rebuild(self):
        self.sum_w = math.fsum(self.w)
        self.sum_w2 = math.fsum(x * x for x in self.w)
        self._count = 0

    def normalize(self):
        a, b = self.scale, self.shift
        if a != 1.0 or b != 0.0:
            self.w = [a * x + b for x in self.w]
            self.scale, self.shift = 1.0, 0.0
        self._rebuild()

    def momentum(self) -> float:
        return self.scale * self.sum_w / self.n + self.shift

    def energy(self) -> float:
        a, b = self.scale, self.shift
        return (a * a * self.sum_w2 + 2.0 * a * b * self.sum_w) / self.n + b * b

    def apply_affine(self, alpha: float, beta: float):
        self.scale *= alpha
        self.shift = alpha * self.shift + beta
        if not _SCALE_BAND[0] < self.scale < _SCALE_BAND[1]:
            self.normalize()

    def rotate(self, i: int, j: int, c: float, s: float):
        w = self.w
        a, b = self.scale, self.shift
        wi, wj = w[i], w[j]
        vi, vj = a * wi + b, a * wj + b
        ni = ((vi * c + vj * s) - b) / a
        nj = ((vj * c - vi * s) - b) / a
        w[i], w[j] = ni, nj
        self.sum_w += (ni + nj) - (wi + wj)
        self.sum_w2 += (ni * ni + nj * nj) - (wi * wi + wj * wj)
        self._count += 1
        if self._count >= CACHE_REFRESH_INTERVAL:
            self._rebuild()

    def values(self) -> np.ndarray:
        return self.scale * np.array(self.w) + self.shift

    def as_master_vector(self) -> MasterVector:
        return MasterVector(self.values())


class InteractingDynamics:
    """Thermostatted flow driven by the state's own current and energy.

    U is a first integral of both the flow and the rotations, so the initial
    energy is used throughout; the current is read from the running sums.
    """

    def __init__(self, state: LazyState, field: float):
        self.state = state
        self.field = field
        self.u = state.energy()
        if field > 0:
            if not self.u > 0:
                raise DegenerateStateError("thermostat undefined at zero energy")

    def advance(self, h: float):
        if h <= 0.0 or self.field == 0.0:
            return
        alpha, beta, _ = segment(0.0, self.u, self.field, self.state.momentum(), h)
        self.state.apply_affine(alpha, beta)


class QuenchedDynamics:
    """Affine flow driven by the deterministic current Jhat(t) and energy Uhat."""

    def __init__(self, state: LazyState, field: float, jhat0: float, u_hat: float):
        if field > 0 and not u_hat > 0:
            raise DegenerateStateError("quenched force undefined at zero energy")
        self.state = state
        self.field = field
        self.u_hat = u_hat
        self.jhat0 = jhat0
        self.jhat = jhat0

    def advance(self, h: float):
        if h <= 0.0:
            return
        alpha, beta, self.jhat = segment(DAMPING["quenched"], self.u_hat, self.field, self.jhat, h)
        if self.field != 0.0:
            self.state.apply_affine(alpha, beta)

    def jhat_ode(self, t: float) -> float:
        return solve_current("quenched", self.u_hat, self.field, self.jhat0, 0.0, t)


def replica_keys(config: SimConfig, replica: int) -> tuple[RngStreamKey, RngStreamKey]:
    return (
        RngStreamKey(config.master_seed, replica, StreamTag.initial_state),
        RngStreamKey(config.master_seed, replica, StreamTag.collision_history),
    )


def quenched_parameters(config: SimConfig, v0: MasterVector, project: bool) -> tuple[float, float]:
    """(Jhat(0), Uhat) for the quenched force, per ``config.quenched_init``."""
    if config.quenched_init == "empirical":
        n = v0.n
        return v0.cached_sum / n, v0.cached_sum_sq / n
    dist = config.initial_distribution
    m1, m2 = dist.raw_moment(1), dist.raw_moment(2)
    if project:
        # law of large numbers limit of the rescaled draw
        return m1 / math.sqrt(m2), 1.0
    return m1, m2


def drive(
    dynamics: Sequence,
    history: CollisionHistory,
    sample_times: Sequence[float],
    on_sample: Callable[[int, float], None],
) -> int:
    """Run the shared event loop; returns the number of collisions applied.

    Every entry of ``dynamics`` sees the same flow gaps and the same jumps.
    Samples at time t are taken after any collision at exactly t.
    """
    states = [d.state for d in dynamics]
    ns = len(sample_times)
    k = 0
    t = 0.0
    n_events = 0
    while k < ns and sample_times[k] <= 0.0:
        on_sample(k, sample_times[k])
        k += 1
    for batch in history.batches():
        if k >= ns:
            break
        cos = np.cos(batch.angles).tolist()
        sin = np.sin(batch.angles).tolist()
        for te, i, j, c, s in zip(batch.times.tolist(), batch.i.tolist(), batch.j.tolist(), cos, sin):
            while k < ns and sample_times[k] < te:
                ts = sample_times[k]
                for d in dynamics:
                    d.advance(ts - t)
                t = ts
                on_sample(k, ts)
                k += 1
            if k >= ns:
                break
            for d in dynamics:
                d.advance(te - t)
            for st in states:
                st.rotate(i, j, c, s)
            t = te
            n_events += 1
    # a finite (replayed) history may end before the last sample time
    while k < ns:
        ts = sample_times[k]
        for d in dynamics:
            d.advance(ts - t)
        t = ts
        on_sample(k, ts)
        k += 1
    return n_events


def _initial(config: SimConfig, replica: int, process: str):
    init_key, hist_key = replica_keys(config, replica)
    project = config.projection_for(process)
    v0 = sample_initial_state(config, init_key, project=project)
    history = CollisionHistory(config.n_particles, key=hist_key)
    return v0, history, project


def simulate(
    config: SimConfig,
    process: str,
    replica: int = 0,
    snapshots: bool = False,
    history: CollisionHistory | None = None,
) -> list[TrajectorySample]:
    """One replica of the interacting or quenched process, sampled at ``config.sample_times``."""
    if process not in ("interacting", "quenched"):
        raise ValueError(f"unknown process {process!r}")
    v0, own_history, project = _initial(config, replica, process)
    history = history or own_history
    state = LazyState(v0.velocities)
    if process == "interacting":
        dyn = InteractingDynamics(state, config.field_strength)
    else:
        jhat0, u_hat = quenched_parameters(config, v0, project)
        dyn = QuenchedDynamics(state, config.field_strength, jhat0, u_hat)
    out: list[TrajectorySample] = []
    drive([dyn], history, config.sample_times, lambda k, t: out.append(_observe(state.values(), t, snapshots)))
    return out


def simulate_coupled(
    config: SimConfig,
    replica: int = 0,
    snapshots: bool = False,
    history: CollisionHistory | None = None,
) -> list[CoupledSample]:
    """Interacting and quenched processes from the same V0 and the same collision history."""
    v0, own_history, project = _initial(config, replica, "coupled")
    history = history or own_history
    s_int, s_q = LazyState(v0.velocities), LazyState(v0.velocities)
    jhat0, u_hat = quenched_parameters(config, v0, project)
    d_int = InteractingDynamics(s_int, config.field_strength)
    d_q = QuenchedDynamics(s_q, config.field_strength, jhat0, u_hat)
    out: list[CoupledSample] = []

    def record(k, t):
        a, b = s_int.values(), s_q.values()
        diff = a - b
        out.append(
            CoupledSample(
                t,
                float(math.sqrt(np.mean(diff * diff))),
                float(np.mean(a)),
                float(np.mean(b)),
                float(np.mean(a * a)),
                float(np.mean(b * b)),
                d_q.jhat_ode(t),
                float(np.mean(np.abs(np.sort(a) - np.sort(b)))),
                a if snapshots else None,
                b if snapshots else None,
            )
        )

    drive([d_int, d_q], history, config.sample_times, record)
    return out


def sup_distance(samples: Iterable[CoupledSample]) -> float:
    return max(s.distance_n for s in samples)


# -- ensembles --------------------------------------------------------------

TRAJECTORY_FIELDS = ("J", "U", "m2", "m4", "m6")
COUPLED_FIELDS = ("distance_N", "J_int", "J_quench", "U_int", "U_quench", "Jhat_ode", "W1")


def sample_row(s) -> tuple[float, ...]:
    if isinstance(s, CoupledSample):
        return (s.distance_n, s.j_interacting, s.j_quenched, s.u_interacting, s.u_quenched, s.jhat_ode, s.w1)
    return (s.j_value, s.u_value, *s.moments)


@dataclass
class EnsembleResult:
    mode: str
    times: tuple[float, ...]
    fields: tuple[str, ...]
    trajectories: list[list]  # indexed by replica
    values: np.ndarray  # (replicas, times, fields)
    mean: np.ndarray  # (times, fields)
    stderr: np.ndarray  # (times, fields)

    @property
    def replicas(self) -> int:
        return len(self.trajectories)

    def column(self, name: str) -> np.ndarray:
        """Per-replica values of one observable, shape (replicas, times)."""
        return self.values[:, :, self.fields.index(name)]

    def snapshots(self, which: str = "velocities") -> np.ndarray:
        """Velocity snapshots, shape (replicas, times, N); needs ``snapshots=True``."""
        attr = {"velocities": "snapshot", "interacting": "snapshot_interacting", "quenched": "snapshot_quenched"}[which]
        return np.array([[getattr(s, attr) for s in traj] for traj in self.trajectories])


def aggregate(mode: str, times: Sequence[float], results: Iterable[tuple[int, list]]) -> EnsembleResult:
    """Combine per-replica trajectories; the input order does not matter."""
    ordered = [traj for _, traj in sorted(results, key=lambda r: r[0])]
    fields = COUPLED_FIELDS if mode == "coupled" else TRAJECTORY_FIELDS
    values = np.array([[sample_row(s) for s in traj] for traj in ordered], dtype=float)
    r = len(ordered)
    mean = values.mean(axis=0)
    if r > 1:
        stderr = values.std(axis=0, ddof=1) / math.sqrt(r)
    else:
        stderr = np.zeros_like(mean)
    return EnsembleResult(mode, tuple(times), fields, ordered, values, mean, stderr)


def run_replica(config: SimConfig, mode: str, replica: int, snapshots: bool = False) -> tuple[int, list]:
    try:
        if mode == "coupled":
            return replica, simulate_coupled(config, replica, snapshots)
        return replica, simulate(config, mode, replica, snapshots)
    except Exception as exc:  # noqa: BLE001 - rewrapped with the replay key
        raise ReplicaError(replica, replica_keys(config, replica), exc) from exc


def _run_replica_star(args):
    return run_replica(*args)


def run_ensemble(config: SimConfig, mode: str, threads: int = 1, snapshots: bool = False) -> EnsembleResult:
    """Run ``config.replicas`` independent replicas, each fixed by (master_seed, replica)."""
    if mode not in ("interacting", "quenched", "coupled"):
        raise ValueError(f"unknown mode {mode!r}")
    jobs = [(config, mode, r, snapshots) for r in range(config.replicas)]
    if threads <= 1 or config.replicas == 1:
        results = [run_replica(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_replica_star, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    return aggregate(mode, config.sample_times, results)
