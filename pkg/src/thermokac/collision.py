"""Kac jump process: exponential clocks, uniform pairs and angles, pair rotations."""

from __future__ import annotations

import csv
import math
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .core import MasterVector, RngStreamKey, StreamTag

BATCH_SIZE = 4096
HISTORY_COLUMNS = ("event_index", "time", "i", "j", "theta")


class CollisionEvent(NamedTuple):
    time: float
    i: int
    j: int
    angle: float

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)


class EventBatch(NamedTuple):
    times: np.ndarray
    i: np.ndarray
    j: np.ndarray
    angles: np.ndarray


def rotate_pair(v: MasterVector, e: CollisionEvent) -> MasterVector:
    """Apply the pair rotation R_ij(theta) in place and return ``v``."""
    i, j = e.i, e.j
    n = v.n
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise IndexError(f"invalid collision pair ({i}, {j}) for N={n}")
    c, s = math.cos(e.angle), math.sin(e.angle)
    vel = v.velocities
    a, b = float(vel[i]), float(vel[j])
    a2, b2 = a * c + b * s, b * c - a * s
    vel[i], vel[j] = a2, b2
    v.cached_sum += (a2 + b2) - (a + b)
    # sum of squares is invariant under the rotation; only rounding changes it
    v.touch()
    return v


class CollisionHistory:
    """A replayable stream of collision events for ``n`` particles.

    Either driven by an RNG stream (``key``) or by a fixed list of events
    (``events``, e.g. read back from a CSV dump). Iterating twice over the
    same history yields identical events.

    ``angle_density`` optionally replaces the uniform angle law with a density
    on (-pi, pi] bounded by ``angle_bound``; angles are then drawn by rejection.
    """

    def __init__(
        self,
        n: int,
        key: RngStreamKey | None = None,
        events: list[CollisionEvent] | None = None,
        angle_density: Callable[[np.ndarray], np.ndarray] | None = None,
        angle_bound: float | None = None,
        batch_size: int = BATCH_SIZE,
    ):
        if n < 2:
            raise ValueError("a collision needs at least two particles")
        if (key is None) == (events is None):
            raise ValueError("give exactly one of key or events")
        if key is not None and key.stream_tag != StreamTag.collision_history:
            raise ValueError("collision histories need a collision_history stream")
        if angle_density is not None and not (angle_bound and angle_bound > 0):
            raise ValueError("a custom angle density needs a positive upper bound")
        self.n = n
        self.key = key
        self.events = events
        self.angle_density = angle_density
        self.angle_bound = angle_bound
        self.batch_size = batch_size
        self.rate = float(n)
        self._rng = None
        self._pending: list[tuple[float, int, int, float]] = []

    # -- raw draws ---------------------------------------------------------

    def _angles(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.angle_density is None:
            return math.pi - 2.0 * math.pi * rng.random(size)
        out = np.empty(size)
        filled = 0
        while filled < size:
            cand = math.pi - 2.0 * math.pi * rng.random(size)
            keep = cand[rng.random(size) * self.angle_bound < self.angle_density(cand)]
            take = min(size - filled, len(keep))
            out[filled : filled + take] = keep[:take]
            filled += take
        return out

    def _draw(self, rng: np.random.Generator, size: int):
        n = self.n
        dt = rng.exponential(1.0 / self.rate, size)
        first = rng.integers(0, n, size)
        second = rng.integers(0, n - 1, size)
        second = second + (second >= first)
        lo, hi = np.minimum(first, second), np.maximum(first, second)
        return dt, lo, hi, self._angles(rng, size)

    # -- public API --------------------------------------------------------

    def batches(self, t_start: float = 0.0) -> Iterator[EventBatch]:
        """Yield events in chunks; times are absolute and strictly increasing."""
        if self.events is not None:
            ev = self.events
            for k in range(0, len(ev), self.batch_size):
                chunk = ev[k : k + self.batch_size]
                yield EventBatch(
                    np.array([e.time for e in chunk], dtype=float),
                    np.array([e.i for e in chunk], dtype=np.int64),
                    np.array([e.j for e in chunk], dtype=np.int64),
                    np.array([e.angle for e in chunk], dtype=float),
                )
            return
        rng = self.key.generator()
        t = t_start
        while True:
            dt, lo, hi, theta = self._draw(rng, self.batch_size)
            times = t + np.cumsum(dt)
            t = float(times[-1])
            yield EventBatch(times, lo, hi, theta)

    def __iter__(self) -> Iterator[CollisionEvent]:
        for b in self.batches():
            yield from (
                CollisionEvent(t, i, j, a)
                for t, i, j, a in zip(b.times.tolist(), b.i.tolist(), b.j.tolist(), b.angles.tolist())
            )

    def until(self, t_end: float) -> list[CollisionEvent]:
        """All events with time <= t_end."""
        out = []
        for e in self:
            if e.time > t_end:
                break
            out.append(e)
        return out

    def next_draw(self) -> tuple[float, int, int, float]:
        """One raw (waiting time, i, j, theta) draw from the underlying stream."""
        if self.key is None:
            raise ValueError("raw draws need an RNG-driven history")
        if not self._pending:
            if self._rng is None:
                self._rng = self.key.generator()
            dt, lo, hi, theta = self._draw(self._rng, self.batch_size)
            self._pending = list(zip(dt.tolist(), lo.tolist(), hi.tolist(), theta.tolist()))
            self._pending.reverse()
        return self._pending.pop()

    # -- CSV dump / replay -------------------------------------------------

    def dump_csv(self, path, t_end: float) -> int:
        events = self.until(t_end)
        write_history_csv(path, events)
        return len(events)

    @classmethod
    def from_csv(cls, path, n: int) -> "CollisionHistory":
        return cls(n, events=read_history_csv(path))


def sample_next_event(history: CollisionHistory, t_now: float, n: int) -> CollisionEvent:
    """Draw the next collision after ``t_now``: Exp(n) wait, uniform pair, uniform angle.

    The generator gives each of the n(n-1)/2 pairs rate 2/(n-1), so the total
    jump rate is n.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if n != history.n:
        raise ValueError(f"history is for N={history.n}, not {n}")
    dt, i, j, theta = history.next_draw()
    return CollisionEvent(t_now + dt, i, j, theta)


def write_history_csv(path, events) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for k, e in enumerate(events):
            w.writerow((k, repr(float(e.time)), int(e.i), int(e.j), repr(float(e.angle))))


def read_history_csv(path) -> list[CollisionEvent]:
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        if tuple(rows.fieldnames or ()) != HISTORY_COLUMNS:
            raise ValueError(f"expected columns {HISTORY_COLUMNS}, got {rows.fieldnames}")
        events = [CollisionEvent(float(r["time"]), int(r["i"]), int(r["j"]), float(r["theta"])) for r in rows]
    for a, b in zip(events, events[1:]):
        if not b.time > a.time:
            raise ValueError("event times must be strictly increasing")
    for e in events:
        if not 0 <= e.i < e.j:
            raise ValueError(f"invalid pair ({e.i}, {e.j})")
    return events
