"""Right-hand side of the reduced system and its time integrators.

Two integrators share one sampling contract: the solution is reported on a
uniform grid of ``max_samples`` points over ``[0, t_end]``, and every
integrator lands exactly on those times. ``adaptive`` is the Dormand-Prince
5(4) pair with a proportional-integral step controller; ``fixed_rk4`` is the
classical four-stage method used as an independent reference.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from . import conserved, constraint
from .core_types import (
    PHI, PSI, RHO, U, V, ExtendedState, InitialData, InvalidDataError,
    Tolerances, Trajectory, initial_vector,
)

log = logging.getLogger(__name__)

PI = math.pi


@dataclass(frozen=True)
class Derivative:
    du: float
    dv: float
    drho: float
    dpsi: float
    dphi: float
    da: float
    db: float

    def as_array(self) -> np.ndarray:
        return np.array([self.du, self.dv, self.drho, self.dpsi, self.dphi, self.da, self.db])


def _rhs_values(u, v, rho, psi, a, b, lam):
    du = 2.0 / 3.0 * lam - u * u + v * v / 3.0 - 4.0 / 3.0 * u * v - 8.0 / 3.0 * PI * psi
    dv = 2.0 / 3.0 * lam - 5.0 / 3.0 * v * v - u * v / 3.0 - 8.0 / 3.0 * PI * psi
    h = u + 2.0 * v
    drho = -4.0 / 3.0 * h * rho
    dpsi = -2.0 * h * psi
    return du, dv, drho, dpsi, a * u, b * v


def rhs(state: ExtendedState, lam: float) -> Derivative:
    """Time derivative of the extended state for cosmological constant ``lam``."""
    r = state.reduced
    vals = (r.u, r.v, r.rho, r.psi, r.phi, state.a, state.b, lam)
    if not all(math.isfinite(x) for x in vals):
        raise InvalidDataError("state must be finite")
    if r.psi < 0:
        raise InvalidDataError(f"psi must be >= 0, got {r.psi}")
    du, dv, drho, dpsi, da, db = _rhs_values(r.u, r.v, r.rho, r.psi, state.a, state.b, lam)
    return Derivative(du, dv, drho, dpsi, math.sqrt(2.0 * r.psi), da, db)


def rhs_array(y: np.ndarray, lam: float) -> np.ndarray:
    """Array form of :func:`rhs`. ``y`` has the seven fields on axis 0; extra axes broadcast.

    ``psi`` is clamped at zero under the square root.
    """
    u, v, rho, psi, _, a, b = y
    du, dv, drho, dpsi, da, db = _rhs_values(u, v, rho, psi, a, b, lam)
    dphi = np.sqrt(2.0 * np.maximum(psi, 0.0))
    return np.array([du, dv, drho, dpsi, dphi, da, db])


def _rhs_fast(y: np.ndarray, lam: float) -> np.ndarray:
    # scalar path for the stepping loops; float arithmetic beats numpy at length 7
    u, v, rho, psi, _, a, b = y.tolist()
    du, dv, drho, dpsi, da, db = _rhs_values(u, v, rho, psi, a, b, lam)
    return np.array([du, dv, drho, dpsi, math.sqrt(2.0 * psi) if psi > 0 else 0.0, da, db])


class Method(str, Enum):
    ADAPTIVE = "adaptive"
    FIXED_RK4 = "fixed_rk4"


@dataclass(frozen=True)
class SolverConfig:
    """Integration settings.

    For ``fixed_rk4`` the step is ``initial_step``, shortened per sample
    interval so an integer number of steps lands on each sample time.
    """

    method: Method = Method.ADAPTIVE
    initial_step: float = 1e-3
    min_step: float = 1e-12
    max_step: float = 0.5
    tolerances: Tolerances = field(default_factory=Tolerances)
    t_end: float = 10.0
    max_samples: int = 1001
    project_rho: bool = False
    blowup_ceiling: float = 1e12
    max_steps: int = 5_000_000

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        for name in ("initial_step", "min_step", "max_step", "t_end", "blowup_ceiling"):
            x = getattr(self, name)
            if not (x > 0 and math.isfinite(x)):
                raise InvalidDataError(f"{name} must be positive and finite, got {x!r}")
        if not self.min_step <= self.initial_step <= self.max_step:
            raise InvalidDataError("need min_step <= initial_step <= max_step")
        if int(self.max_samples) != self.max_samples or self.max_samples < 2:
            raise InvalidDataError("max_samples must be an integer >= 2")

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, int(self.max_samples))

    def describe(self) -> dict:
        d = asdict(self)
        d["method"] = self.method.value
        return d


# Dormand-Prince 5(4) tableau
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between the 5th and embedded 4th order weights
_E = _B5 - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

# PI controller gains for a 5th order pair
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA
_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 5.0

# rho, psi, a, b obey dx/dt = c(t) x: controlled in relative terms only
_MULTIPLICATIVE = np.array([False, False, True, True, False, True, True])


def _dopri_step(y, k1, h, lam):
    ks = [k1]
    for i in range(1, 6):
        yi = y.copy()
        for j, aij in enumerate(_A[i]):
            if aij:
                yi += h * aij * ks[j]
        ks.append(_rhs_fast(yi, lam))
    y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b)
    # FSAL: the seventh stage is the derivative at the new point
    ks.append(_rhs_fast(y_new, lam))
    err = h * sum(e * k for e, k in zip(_E, ks) if e)
    return y_new, err, ks[6]


def _error_norm(y, y_new, err, tol: Tolerances):
    mag = np.maximum(np.abs(y), np.abs(y_new))
    scale = np.where(_MULTIPLICATIVE, tol.rel_tol * mag, tol.abs_tol + tol.rel_tol * mag)
    ratio = np.zeros(7)
    nz = scale > 0
    ratio[nz] = err[nz] / scale[nz]
    # a component with zero scale (rho == 0 exactly) and nonzero error is a failure
    ratio[~nz & (err != 0)] = np.inf
    if y[PSI] < tol.abs_tol:
        # phi has a square-root derivative near psi = 0 and feeds nothing back
        ratio[PHI] = 0.0
    return math.sqrt(float(np.mean(ratio * ratio)))


def _project_rho(y: np.ndarray, lam: float) -> None:
    u, v, psi = y[U], y[V], y[PSI]
    y[RHO] = max((v * v + 2.0 * u * v - lam - constraint.EIGHT_PI * psi) / constraint.EIGHT_PI, 0.0)


class _Run:
    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.n_steps = 0
        self.n_rejected = 0
        self.n_rhs = 0
        self.termination = "completed"

    def blown_up(self, y) -> bool:
        return (not np.all(np.isfinite(y))) or abs(y[U]) + abs(y[V]) > self.cfg.blowup_ceiling


def _integrate_adaptive(y0, lam, cfg: SolverConfig, run: _Run):
    tol = cfg.tolerances
    samples = cfg.sample_times()
    out = [y0.copy()]
    y = y0.copy()
    t = 0.0
    k1 = _rhs_fast(y, lam)
    run.n_rhs += 1
    h = cfg.initial_step
    err_prev = 1e-4
    for target in samples[1:]:
        while t < target:
            if run.n_steps + run.n_rejected >= cfg.max_steps:
                run.termination = "step budget exhausted"
                return out
            remaining = target - t
            last = h >= remaining * (1 - 1e-12)
            h_try = remaining if last else h
            y_new, err, k_new = _dopri_step(y, k1, h_try, lam)
            run.n_rhs += 6
            enorm = _error_norm(y, y_new, np.abs(err), tol)
            if not math.isfinite(enorm):
                enorm = 1e10
            if enorm <= 1.0:
                t = target if last else t + h_try
                y = y_new
                k1 = k_new
                run.n_steps += 1
                if cfg.project_rho:
                    _project_rho(y, lam)
                    k1 = _rhs_fast(y, lam)
                    run.n_rhs += 1
                if run.blown_up(y):
                    run.termination = "blow-up detected"
                    return out
                if enorm == 0.0:
                    fac = _FAC_MAX
                else:
                    fac = _SAFETY * enorm ** -_ALPHA * err_prev ** _BETA
                    fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                err_prev = max(enorm, 1e-4)
                h_next = h_try * fac
                # a step clipped to hit a sample time must not shrink the next one
                h = min(cfg.max_step, max(h, h_next) if last else h_next)
            else:
                run.n_rejected += 1
                fac = max(_FAC_MIN, _SAFETY * enorm ** -0.2)
                h = h_try * fac
                if h < cfg.min_step:
                    run.termination = "step underflow"
                    return out
        out.append(y.copy())
    return out


def _rk4_step(y, h, lam):
    k1 = _rhs_fast(y, lam)
    k2 = _rhs_fast(y + 0.5 * h * k1, lam)
    k3 = _rhs_fast(y + 0.5 * h * k2, lam)
    k4 = _rhs_fast(y + h * k3, lam)
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate_rk4(y0, lam, cfg: SolverConfig, run: _Run):
    samples = cfg.sample_times()
    out = [y0.copy()]
    y = y0.copy()
    for t0, t1 in zip(samples[:-1], samples[1:]):
        n = max(1, math.ceil((t1 - t0) / cfg.initial_step - 1e-9))
        h = (t1 - t0) / n
        for _ in range(n):
            y = _rk4_step(y, h, lam)
            run.n_steps += 1
            run.n_rhs += 4
            if cfg.project_rho:
                _project_rho(y, lam)
            if run.blown_up(y):
                run.termination = "blow-up detected"
                return out
        out.append(y)
    return out


def integrate(data: InitialData, config: SolverConfig = SolverConfig()) -> Trajectory:
    """Integrate from ``t = 0`` to ``config.t_end``.

    Blow-up (``|u| + |v|`` above the ceiling or a non-finite state) and step
    underflow end the run early; the samples reached so far are returned
    and ``meta["termination"]`` says why.
    """
    y0 = initial_vector(data)
    run = _Run(config)
    if config.method is Method.ADAPTIVE:
        rows = _integrate_adaptive(y0, data.lam, config, run)
    else:
        rows = _integrate_rk4(y0, data.lam, config, run)
    times = config.sample_times()[: len(rows)]
    traj = Trajectory(times, np.array(rows))
    traj.meta = {
        "solver": config.method.value,
        "config": config.describe(),
        "lambda": data.lam,
        "termination": run.termination,
        "n_steps": run.n_steps,
        "n_rejected": run.n_rejected,
        "n_rhs": run.n_rhs,
    }
    if run.termination != "completed":
        log.warning("integration stopped at t=%.6g: %s", times[-1], run.termination)
    traj.diagnostics = diagnostics(traj, data)
    return traj


def diagnostics(traj: Trajectory, data: InitialData) -> dict[str, np.ndarray]:
    """Per-sample constraint residual, H, envelope W and conserved quantities."""
    from .bounds import envelope_w_array

    residual, relative = constraint.residual_arrays(traj.states, data.lam)
    H = traj.u + 2.0 * traj.v
    diag = {
        "constraint_residual": residual,
        "constraint_relative": relative,
        "H": H,
        "W": envelope_w_array(data.rho0, data.lam, H[0], traj.times),
    }
    diag.update(conserved.snapshot_arrays(traj.states))
    return diag
