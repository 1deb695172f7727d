"""Global-existence bounds: the expansion scalar ``H = u + 2v``, the Riccati
envelope that dominates it, and a per-trajectory certificate of every bound
the argument relies on.

On solutions, ``H' = 3 Lambda + 8 pi rho - H^2``. Since ``rho`` never
increases, ``H`` stays below the solution ``W`` of
``W' = C0^2 - W^2``, ``W(0) = H(0)``, with ``C0^2 = 3 Lambda + 8 pi rho0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraint import EIGHT_PI
from .core_types import (
    BianchiError, InitialData, RegimeViolation, ReducedState, Tolerances, Trajectory,
)


class PoleError(BianchiError):
    """The Riccati solution reaches ``-inf`` inside the requested interval."""


class DegenerateError(BianchiError):
    """``3 Lambda + 8 pi rho0 == 0``: the envelope has no positive equilibrium."""


def expansion_scalar(state: ReducedState) -> float:
    return state.u + 2.0 * state.v


@dataclass(frozen=True)
class RiccatiParams:
    """``y' = K^2 - alpha^2 y^2`` with ``y(t0) = y0``."""

    K: float
    alpha: float
    y0: float
    t0: float = 0.0

    def __post_init__(self):
        if not (self.K > 0 and self.alpha > 0):
            raise BianchiError(f"need K > 0 and alpha > 0, got K={self.K}, alpha={self.alpha}")
        if not (math.isfinite(self.y0) and math.isfinite(self.t0)):
            raise BianchiError("y0 and t0 must be finite")

    @property
    def h1(self) -> float:
        return self.alpha * self.y0 - self.K

    @property
    def h2(self) -> float:
        return self.alpha * self.y0 + self.K

    @property
    def pole_time(self) -> float:
        """Time at which the solution diverges; ``inf`` unless ``y0 < -K/alpha``."""
        h1, h2 = self.h1, self.h2
        if h2 >= 0:
            return math.inf
        return self.t0 - math.log(h2 / h1) / (2.0 * self.alpha * self.K)


def riccati_closed_form(p: RiccatiParams, t):
    """Closed-form Riccati solution at ``t >= p.t0`` (scalar or array).

    Written as ``(K/alpha) [1 + 2 h1 E / (h2 - h1 E)]`` with
    ``E = exp(-2 alpha K (t - t0))``, algebraically the same as
    ``(K/alpha) [1 + 2 h1 / (h2 exp(2 alpha K (t - t0)) - h1)]`` but free of
    overflow for large ``t``.
    """
    t_arr = np.asarray(t, dtype=float)
    tau = t_arr - p.t0
    if np.any(tau < 0):
        raise BianchiError("closed form is evaluated forward in time only (t >= t0)")
    if np.any(t_arr >= p.pole_time):
        raise PoleError(f"solution has a pole at t = {p.pole_time:.17g}")
    E = np.exp(-2.0 * p.alpha * p.K * tau)
    h1, h2 = p.h1, p.h2
    denom = h2 - h1 * E
    if np.any(denom == 0):
        raise PoleError("denominator vanishes")
    y = (p.K / p.alpha) * (1.0 + 2.0 * h1 * E / denom)
    return float(y) if np.ndim(t) == 0 else y


def envelope_constant(rho0: float, lam: float) -> float:
    """``C0 = sqrt(3 Lambda + 8 pi rho0)``."""
    return math.sqrt(3.0 * lam + EIGHT_PI * rho0)


def envelope_w(rho0: float, lam: float, h0: float, t, allow_degenerate: bool = False):
    """Riccati envelope ``W(t)`` with ``W(0) = h0``.

    When ``3 Lambda + 8 pi rho0 == 0`` this raises :class:`DegenerateError`,
    unless ``allow_degenerate`` is set, in which case ``h0 / (1 + h0 t)`` is
    returned.
    """
    if lam < 0 or rho0 < 0:
        raise BianchiError("envelope needs lambda >= 0 and rho0 >= 0")
    c0_sq = 3.0 * lam + EIGHT_PI * rho0
    if c0_sq == 0:
        if not allow_degenerate:
            raise DegenerateError("3*lambda + 8*pi*rho0 = 0")
        t_arr = np.asarray(t, dtype=float)
        if h0 < 0 and np.any(1.0 + h0 * t_arr <= 0):
            raise PoleError(f"degenerate envelope has a pole at t = {-1.0 / h0:.17g}")
        w = h0 / (1.0 + h0 * t_arr)
        return float(w) if np.ndim(t) == 0 else w
    return riccati_closed_form(RiccatiParams(math.sqrt(c0_sq), 1.0, h0, 0.0), t)


def envelope_w_array(rho0: float, lam: float, h0: float, times: np.ndarray) -> np.ndarray:
    """Diagnostic column: ``W`` on ``times``, NaN where it is undefined."""
    times = np.asarray(times, dtype=float)
    try:
        return np.asarray(envelope_w(rho0, lam, h0, times, allow_degenerate=True), dtype=float)
    except BianchiError:
        return np.full_like(times, np.nan)


def comparison_margin(traj: Trajectory, data: InitialData) -> np.ndarray:
    """``3 Lambda + 8 pi rho0 - H^2 - H'`` per sample, ``H'`` by second-order differences.

    Nonnegative on exact solutions in the global regime.
    """
    H = traj.u + 2.0 * traj.v
    H_dot = np.gradient(H, traj.times, edge_order=2)
    return 3.0 * data.lam + EIGHT_PI * data.rho0 - H * H - H_dot


@dataclass(frozen=True)
class ConditionRecord:
    name: str
    description: str
    passed: bool
    margin: float
    time: float


@dataclass
class Certificate:
    """Outcome of :func:`certify`.

    Each margin is the worst normalised distance to the boundary of its
    condition (negative: on the wrong side). Conditions with slack pass
    down to ``-slack``.
    """

    conditions: list[ConditionRecord]
    slack: float
    min_u: float = math.nan
    min_u_time: float = math.nan
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name: str) -> ConditionRecord:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list[ConditionRecord]:
        return [c for c in self.conditions if not c.passed]

    def to_keyvalue(self) -> str:
        lines = [f"overall = {'pass' if self.passed else 'fail'}", f"slack = {self.slack:.17g}"]
        for c in self.conditions:
            lines.append(f"{c.name}.passed = {str(c.passed).lower()}")
            lines.append(f"{c.name}.margin = {c.margin:.17g}")
            lines.append(f"{c.name}.time = {c.time:.17g}")
        lines.append(f"min_u = {self.min_u:.17g}")
        lines.append(f"min_u_time = {self.min_u_time:.17g}")
        for k, v in self.extras.items():
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(c.description) for c in self.conditions)
        out = [f"Global existence certificate: {'PASS' if self.passed else 'FAIL'}",
               f"  monotonicity slack {self.slack:.3g}", ""]
        for c in self.conditions:
            flag = "ok  " if c.passed else "FAIL"
            out.append(f"  [{flag}] {c.description:<{width}}  worst margin {c.margin: .6e} at t = {c.time:.6g}")
        out.append("")
        out.append(f"  min u = {self.min_u:.6e} at t = {self.min_u_time:.6g} (diagnostic, no threshold)")
        for k, v in self.extras.items():
            out.append(f"  {k}: {v}")
        return "\n".join(out) + "\n"


def _worst(margins: np.ndarray, times: np.ndarray) -> tuple[float, float]:
    i = int(np.argmin(margins))
    return float(margins[i]), float(times[i])


def _positive(name, desc, x, times) -> ConditionRecord:
    m, t = _worst(x, times)
    return ConditionRecord(name, desc, bool(m > 0), m, t)


def _decaying(name, desc, x, x0, times, slack) -> ConditionRecord:
    """``0 < x <= x0`` and ``x`` non-increasing; the last two up to relative slack."""
    positive = _worst(x / x0, times)
    below = _worst((x0 - x) / x0, times)
    if len(x) > 1:
        scale = np.maximum(np.abs(x[:-1]), np.abs(x[1:]))
        step = np.where(scale > 0, (x[:-1] - x[1:]) / np.where(scale > 0, scale, 1.0), 0.0)
        steps = _worst(step, times[1:])
    else:
        steps = (math.inf, float(times[0]))
    passed = positive[0] > 0 and below[0] >= -slack and steps[0] >= -slack
    m, t = min(positive, below, steps)
    return ConditionRecord(name, desc, bool(passed), m, t)


def certify(traj: Trajectory, data: InitialData, tol: Tolerances = Tolerances()) -> Certificate:
    """Check every bound of the global existence argument at every sample.

    Requires ``Lambda >= 0``, ``b'(0) > 0``, ``rho0 > 0`` and ``phi'(0) > 0``.
    Comparisons that would be exact on the continuum flow get a relative
    slack of ``10 * constraint_warn``; strict positivity of ``v``,
    ``v + 2u``, ``rho`` and ``psi`` gets none.
    """
    problems = []
    if data.lam < 0:
        problems.append("lambda < 0")
    if data.b_dot0 <= 0:
        problems.append("b_dot0 <= 0")
    if data.rho0 <= 0:
        problems.append("rho0 <= 0")
    if data.phi_dot0 <= 0:
        problems.append("phi_dot0 <= 0")
    if problems:
        raise RegimeViolation("outside the global existence regime: " + ", ".join(problems))
    if len(traj) == 0:
        raise BianchiError("empty trajectory")

    slack = 10.0 * tol.constraint_warn
    t = traj.times
    u, v, rho, psi = traj.u, traj.v, traj.rho, traj.psi
    rho0 = data.rho0
    psi0 = 0.5 * data.phi_dot0 ** 2
    lam = data.lam

    conditions = [
        _positive("v_positive", "v > 0", v, t),
        _positive("v_plus_2u_positive", "v + 2u > 0", v + 2.0 * u, t),
        _decaying("rho_nonincreasing", "rho non-increasing, 0 < rho <= rho0", rho, rho0, t, slack),
        _decaying("psi_nonincreasing", "psi non-increasing, 0 < psi <= psi0", psi, psi0, t, slack),
    ]

    q = v * (v + 2.0 * u)
    upper = lam + EIGHT_PI * (rho0 + psi0)
    scale = np.maximum(np.maximum(abs(lam), np.abs(q)), np.finfo(float).tiny)
    lo = _worst((q - lam) / scale, t)
    hi = _worst((upper - q) / upper, t)
    conditions.append(ConditionRecord(
        "constraint_bracket", "Lambda < v(v+2u) <= Lambda + 8 pi (rho0 + psi0)",
        bool(lo[0] > -slack and hi[0] >= -slack), *min(lo, hi)))

    H = u + 2.0 * v
    W = np.asarray(envelope_w(rho0, lam, H[0], t), dtype=float)
    hw_scale = np.maximum(np.abs(H), np.abs(W))
    hw = (W - H) / np.where(hw_scale > 0, hw_scale, 1.0)
    m, tm = _worst(hw, t)
    conditions.append(ConditionRecord("H_below_W", "H(t) <= W(t)", bool(m >= -slack), m, tm))

    i = int(np.argmin(u))
    return Certificate(conditions, slack, float(u[i]), float(t[i]),
                       extras={"C0": envelope_constant(rho0, lam), "samples": len(t),
                               "t_end": float(t[-1])})


def riccati_numerical(p: RiccatiParams, times, rtol: float = 1e-13) -> np.ndarray:
    """Reference solution of ``y' = K^2 - alpha^2 y^2`` by an 8th order Runge-Kutta code.

    Independent of :func:`riccati_closed_form`; used to check it.
    """
    from scipy.integrate import solve_ivp

    times = np.asarray(times, dtype=float)
    if times[-1] >= p.pole_time:
        raise PoleError(f"solution has a pole at t = {p.pole_time:.17g}")
    K2, a2 = p.K * p.K, p.alpha * p.alpha
    sol = solve_ivp(lambda _, y: K2 - a2 * y * y, (p.t0, float(times[-1])), [p.y0],
                    method="DOP853", t_eval=times, rtol=rtol,
                    atol=1e-15 * p.K / p.alpha)
    if not sol.success:
        raise BianchiError(f"reference integration failed: {sol.message}")
    return sol.y[0]
