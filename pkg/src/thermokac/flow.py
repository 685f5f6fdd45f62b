"""Exact inter-collision dynamics.

Both the thermostatted flow and the quenched flow move every particle by

    dv/dt = E - gamma(t) v,    gamma = E J(t) / U,

with U constant and J following the Riccati equation

    dJ/dt = E - (E/U) J**2 - c J

where c = 0 for the interacting flow and c = 2 for the quenched one (the
extra damping is the collision contribution K v_i = -2 v_i). Writing
J = y' / (a y) with a = E/U linearises this to y'' + c y' - a E y = 0, whose
roots lam_pm = (-c +- sqrt(c**2 + 4 a E)) / 2 give J, the integrating factor
alpha = y(s)/y(t) and the offset beta = E int_s^t y / y(t) in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DegenerateStateError, MasterVector, energy, momentum

DAMPING = {"interacting": 0.0, "quenched": 2.0}


def _expm1_over(x: float, h: float) -> float:
    # (exp(x h) - 1) / x, continuous at x = 0
    if x == 0.0:
        return h
    return math.expm1(x * h) / x


def _roots(damping: float, u: float, field: float) -> tuple[float, float]:
    a = field / u
    root = math.sqrt(damping * damping + 4.0 * a * field)
    return 0.5 * (-damping + root), 0.5 * (-damping - root)


def segment(damping: float, u: float, field: float, j0: float, h: float) -> tuple[float, float, float]:
    """Affine coefficients and end current over one segment of length ``h``.

    Returns ``(alpha, beta, j_end)`` such that every particle maps as
    ``v -> alpha * v + beta`` and the current goes from ``j0`` to ``j_end``.
    """
    if field == 0.0:
        return 1.0, 0.0, j0 * math.exp(-damping * h)
    sq = math.sqrt(u)
    if j0 > sq:
        j0 = sq
    elif j0 < -sq:
        j0 = -sq
    a = field / u
    lp, lm = _roots(damping, u, field)
    delta = lp - lm
    if delta == 0.0:
        # field so small that E**2 / U underflows: the force is negligible
        return 1.0, 0.0, j0
    ed = math.exp(-delta * h)
    aj = a * j0
    cp = (aj - lm) / delta
    cm = (lp - aj) / delta
    den = cp + cm * ed
    alpha = math.exp(-lp * h) / den
    num = cp * _expm1_over(-lp, h) + cm * math.exp(-lp * h) * _expm1_over(lm, h)
    beta = field * num / den
    j_end = (j0 * (lp - lm * ed) + field * (1.0 - ed)) / ((aj - lm) + (lp - aj) * ed)
    return alpha, beta, j_end


def _check_current_args(u_bar: float, j0: float, t0: float, t: float) -> None:
    if not u_bar > 0:
        raise ValueError(f"u_bar must be positive, got {u_bar!r}")
    if abs(j0) > math.sqrt(u_bar) * (1 + 1e-12):
        raise ValueError(f"|j0| = {abs(j0)!r} exceeds sqrt(u_bar) = {math.sqrt(u_bar)!r}")
    if t < t0:
        raise ValueError("t must not precede t0")


def solve_current(kind: str, u_bar: float, field: float, j0: float, t0: float, t: float) -> float:
    """J(t) for the interacting (no damping) or quenched (damping 2) current ODE."""
    _check_current_args(u_bar, j0, t0, t)
    return segment(DAMPING[kind], u_bar, field, j0, t - t0)[2]


def fixed_points(kind: str, u_bar: float, field: float) -> tuple[float, float]:
    """The two stationary currents (J_plus, J_minus); requires field > 0."""
    lp, lm = _roots(DAMPING[kind], u_bar, field)
    a = field / u_bar
    return lp / a, lm / a


@dataclass(frozen=True)
class CurrentSolution:
    kind: str
    u_bar: float
    field: float
    j0: float
    t0: float = 0.0

    def __post_init__(self):
        if self.kind not in DAMPING:
            raise ValueError(f"unknown current kind {self.kind!r}")
        _check_current_args(self.u_bar, self.j0, self.t0, self.t0)

    def evaluate(self, t: float) -> float:
        return solve_current(self.kind, self.u_bar, self.field, self.j0, self.t0, t)

    def __call__(self, t):
        if np.ndim(t):
            return np.array([self.evaluate(float(x)) for x in np.ravel(t)]).reshape(np.shape(t))
        return self.evaluate(t)


@dataclass(frozen=True)
class AffineFlowCoefficients:
    """v(t) = alpha * v(s) + beta for every particle."""

    alpha: float
    beta: float
    s: float
    t: float

    def then(self, later: "AffineFlowCoefficients") -> "AffineFlowCoefficients":
        """Compose with a map over the following interval ``[self.t, later.t]``."""
        if not math.isclose(self.t, later.s, rel_tol=0, abs_tol=1e-12):
            raise ValueError("intervals do not abut")
        return AffineFlowCoefficients(later.alpha * self.alpha, later.alpha * self.beta + later.beta, self.s, later.t)

    def apply(self, x):
        return self.alpha * x + self.beta


def quenched_coefficients(current: CurrentSolution, s: float, t: float) -> AffineFlowCoefficients:
    if current.kind != "quenched":
        raise ValueError("quenched coefficients need a quenched current")
    if t < s:
        raise ValueError("need s <= t")
    j_s = current.evaluate(s)
    alpha, beta, _ = segment(DAMPING["quenched"], current.u_bar, current.field, j_s, t - s)
    return AffineFlowCoefficients(alpha, beta, s, t)


def quenched_flow(v: MasterVector, coeffs: AffineFlowCoefficients) -> MasterVector:
    """Apply the quenched affine map to every velocity, in place."""
    a, b = coeffs.alpha, coeffs.beta
    n = v.n
    s, ss = v.cached_sum, v.cached_sum_sq
    v.velocities *= a
    v.velocities += b
    v.cached_sum = a * s + n * b
    v.cached_sum_sq = a * a * ss + 2.0 * a * b * s + n * b * b
    v.touch()
    return v


def thermostatted_coefficients(v: MasterVector, dt: float, field: float) -> AffineFlowCoefficients:
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if field == 0.0:
        return AffineFlowCoefficients(1.0, 0.0, 0.0, dt)
    u = energy(v)
    if not u > 0:
        raise DegenerateStateError("thermostat undefined at zero energy")
    alpha, beta, _ = segment(DAMPING["interacting"], u, field, momentum(v), dt)
    return AffineFlowCoefficients(alpha, beta, 0.0, dt)


def thermostatted_flow(v: MasterVector, dt: float, field: float) -> MasterVector:
    """Advance V along dV/dt = E (1 - (J/U) V) for time ``dt``, in place.

    U is a first integral of this flow, so the energy cache is left as is.
    """
    coeffs = thermostatted_coefficients(v, dt, field)
    if coeffs.alpha == 1.0 and coeffs.beta == 0.0:
        return v
    u_before = v.cached_sum_sq
    quenched_flow(v, coeffs)
    v.cached_sum_sq = u_before
    return v
