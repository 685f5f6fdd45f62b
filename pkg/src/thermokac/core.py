"""Configuration, particle state, initial-condition samplers and basic observables."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# Caches are rebuilt from scratch after this many incremental updates.
CACHE_REFRESH_INTERVAL = 1 << 16

PROCESSES = ("interacting", "quenched", "coupled")
QUENCHED_INITS = ("empirical", "distributional")


class ConfigError(ValueError):
    """Invalid configuration value; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class DegenerateStateError(ArithmeticError):
    """The thermostat is undefined because the state has zero energy."""


@dataclass(frozen=True)
class InitialDistribution:
    """One of the three supported i.i.d. velocity laws.

    ``kind`` is ``gaussian`` (params mean, variance), ``uniform`` (lo, hi)
    or ``two_point`` (a, b, prob_a).
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        k, p = self.kind, self.params
        if k == "gaussian":
            if len(p) != 2 or p[1] < 0:
                raise ConfigError("initial_distribution", "gaussian needs mean:variance with variance >= 0")
        elif k == "uniform":
            if len(p) != 2 or not p[0] < p[1]:
                raise ConfigError("initial_distribution", "uniform needs lo:hi with lo < hi")
        elif k == "two_point":
            if len(p) != 3 or not 0.0 <= p[2] <= 1.0:
                raise ConfigError("initial_distribution", "two_point needs a:b:prob_a with 0 <= prob_a <= 1")
        else:
            raise ConfigError("initial_distribution", f"unknown family {k!r}")
        if not all(math.isfinite(x) for x in p):
            raise ConfigError("initial_distribution", "parameters must be finite")

    @classmethod
    def parse(cls, text: str) -> "InitialDistribution":
        kind, *rest = text.strip().split(":")
        try:
            params = tuple(float(x) for x in rest)
        except ValueError:
            raise ConfigError("initial_distribution", f"cannot parse {text!r}") from None
        return cls(kind, params)

    def __str__(self):
        return ":".join([self.kind, *(repr(float(x)) for x in self.params)])

    def raw_moment(self, p: int) -> float:
        """Exact E[v^p] for p in 0..6."""
        if not 0 <= p <= 6:
            raise ValueError("moment order must be in 0..6")
        if self.kind == "gaussian":
            mu, var = self.params
            # E[(mu + s Z)^p] via the binomial sum; odd Gaussian moments vanish
            z_moments = (1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0)
            s = math.sqrt(var)
            return sum(math.comb(p, k) * mu ** (p - k) * s**k * z_moments[k] for k in range(p + 1))
        if self.kind == "uniform":
            lo, hi = self.params
            return (hi ** (p + 1) - lo ** (p + 1)) / ((p + 1) * (hi - lo))
        a, b, pa = self.params
        return pa * a**p + (1.0 - pa) * b**p

    def can_be_all_zero(self) -> bool:
        if self.kind == "gaussian":
            return self.params == (0.0, 0.0)
        if self.kind == "two_point":
            a, b, pa = self.params
            return (a == 0 and b == 0) or (a == 0 and pa == 1.0) or (b == 0 and pa == 0.0)
        return False

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            mu, var = self.params
            return rng.normal(mu, math.sqrt(var), n)
        if self.kind == "uniform":
            lo, hi = self.params
            return rng.uniform(lo, hi, n)
        a, b, pa = self.params
        return np.where(rng.random(n) < pa, a, b).astype(float)


@dataclass(frozen=True)
class SimConfig:
    n_particles: int
    field_strength: float
    t_final: float
    sample_times: tuple[float, ...]
    initial_distribution: InitialDistribution
    project_to_sphere: bool | None = None
    replicas: int = 1
    master_seed: int = 0
    quenched_init: str = "empirical"

    def __post_init__(self):
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        if int(self.n_particles) != self.n_particles or self.n_particles < 2:
            raise ConfigError("n_particles", "must be an integer >= 2")
        if not (self.field_strength >= 0 and math.isfinite(self.field_strength)):
            raise ConfigError("field_strength", "must be finite and >= 0")
        if not (self.t_final > 0 and math.isfinite(self.t_final)):
            raise ConfigError("t_final", "must be finite and > 0")
        ts = self.sample_times
        if not ts:
            raise ConfigError("sample_times", "at least one sample time is required")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigError("sample_times", "must be strictly increasing")
        if ts[0] < 0 or ts[-1] > self.t_final:
            raise ConfigError("sample_times", "must lie in [0, t_final]")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ConfigError("replicas", "must be a positive integer")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed", "must be a 64-bit unsigned integer")
        if self.quenched_init not in QUENCHED_INITS:
            raise ConfigError("quenched_init", f"must be one of {QUENCHED_INITS}")
        if self.project_to_sphere is not False and self.initial_distribution.can_be_all_zero():
            raise ConfigError("initial_distribution", "degenerate all-zero law cannot be projected to the sphere")

    def projection_for(self, process: str) -> bool:
        """Whether initial states are rescaled onto the energy sphere for ``process``."""
        if self.project_to_sphere is not None:
            return self.project_to_sphere
        return process != "quenched"


class StreamTag(enum.IntEnum):
    initial_state = 0
    collision_history = 1


@dataclass(frozen=True)
class RngStreamKey:
    master_seed: int
    replica_index: int
    stream_tag: StreamTag

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.replica_index, int(self.stream_tag)))
        return np.random.Generator(np.random.PCG64(seq))


@dataclass
class MasterVector:
    """The N velocities of one replica plus running sums of v and v**2."""

    velocities: np.ndarray
    cached_sum: float = field(default=0.0)
    cached_sum_sq: float = field(default=0.0)
    updates_since_refresh: int = field(default=0, repr=False)

    def __post_init__(self):
        self.velocities = np.array(self.velocities, dtype=float)
        self.refresh()

    @classmethod
    def of(cls, values) -> "MasterVector":
        return cls(np.asarray(values, dtype=float))

    def refresh(self) -> None:
        self.cached_sum = math.fsum(self.velocities)
        self.cached_sum_sq = math.fsum(self.velocities * self.velocities)
        self.updates_since_refresh = 0

    def touch(self) -> None:
        self.updates_since_refresh += 1
        if self.updates_since_refresh >= CACHE_REFRESH_INTERVAL:
            self.refresh()

    @property
    def n(self) -> int:
        return len(self.velocities)

    def copy(self) -> "MasterVector":
        return MasterVector(self.velocities.copy())


def sample_initial_state(config: SimConfig, key: RngStreamKey, project: bool | None = None) -> MasterVector:
    """Draw N i.i.d. velocities, optionally rescaled so that U(V) = 1.

    ``project`` overrides ``config.project_to_sphere``.
    """
    if key.stream_tag != StreamTag.initial_state:
        raise ValueError("initial states must be drawn from an initial_state stream")
    if project is None:
        project = bool(config.project_to_sphere)
    rng = key.generator()
    n = config.n_particles
    v = config.initial_distribution.draw(rng, n)
    if project:
        if config.initial_distribution.can_be_all_zero():
            raise ConfigError("initial_distribution", "degenerate all-zero law cannot be projected to the sphere")
        for _ in range(64):
            ss = float(np.dot(v, v))
            if ss > 0:
                break
            v = config.initial_distribution.draw(rng, n)
        else:
            raise ConfigError("initial_distribution", "repeated all-zero draws")
        v = v * math.sqrt(n / ss)
    return MasterVector(v)


def momentum(v: MasterVector) -> float:
    """J(V), the average momentum per particle."""
    return v.cached_sum / v.n


def energy(v: MasterVector) -> float:
    """U(V), the average energy per particle."""
    return v.cached_sum_sq / v.n


def moment(v: MasterVector, p: int) -> float:
    if p not in (2, 4, 6):
        raise ValueError(f"moment order must be 2, 4 or 6, got {p!r}")
    if p == 2:
        return energy(v)
    return float(np.mean(v.velocities**p))
