"""Hamiltonian constraint: residuals, solving initial data, regime sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core_types import (
    InfeasibleError, InitialData, InvalidDataError, ReducedState, Tolerances,
)

EIGHT_PI = 8.0 * math.pi
FOUR_PI = 4.0 * math.pi


class ConstraintStatus(str, Enum):
    SATISFIED = "satisfied"
    WARN = "warn"
    VIOLATED = "violated"


@dataclass(frozen=True)
class ConstraintReport:
    residual: float
    relative_residual: float
    status: ConstraintStatus


def _classify(relative: float, tol: Tolerances) -> ConstraintStatus:
    r = abs(relative)
    if r <= tol.constraint_warn:
        return ConstraintStatus.SATISFIED
    if r <= tol.constraint_fail:
        return ConstraintStatus.WARN
    return ConstraintStatus.VIOLATED


def _report(terms, tol: Tolerances) -> ConstraintReport:
    # terms enter as v^2 + 2uv - Lambda - 8 pi rho - (scalar term)
    residual = terms[0] + terms[1] - terms[2] - terms[3] - terms[4]
    scale = max(abs(t) for t in terms)
    relative = residual / scale if scale > 0 else 0.0
    return ConstraintReport(residual, relative, _classify(relative, tol))


def residual_reduced(state: ReducedState, lam: float,
                     tol: Tolerances = Tolerances()) -> ConstraintReport:
    """``v^2 + 2uv - Lambda - 8 pi rho - 8 pi psi``, normalised by its largest term."""
    s = state
    terms = (s.v * s.v, 2.0 * s.u * s.v, lam, EIGHT_PI * s.rho, EIGHT_PI * s.psi)
    return _report(terms, tol)


def residual_physical(a: float, a_dot: float, b: float, b_dot: float, rho: float,
                      phi_dot: float, lam: float,
                      tol: Tolerances = Tolerances()) -> ConstraintReport:
    if a <= 0 or b <= 0:
        raise InvalidDataError(f"scale factors must be positive, got a={a}, b={b}")
    hu, hv = a_dot / a, b_dot / b
    # FOUR_PI * phi_dot**2 rounds exactly like EIGHT_PI * (phi_dot**2 / 2)
    terms = (hv * hv, 2.0 * hu * hv, lam, EIGHT_PI * rho, FOUR_PI * (phi_dot * phi_dot))
    return _report(terms, tol)


def residual_arrays(states: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised residual and relative residual over rows ``(u, v, rho, psi, ...)``."""
    states = np.atleast_2d(states)
    u, v, rho, psi = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    terms = np.stack([v * v, 2.0 * u * v, np.full_like(u, lam), EIGHT_PI * rho, EIGHT_PI * psi])
    residual = terms[0] + terms[1] - terms[2] - terms[3] - terms[4]
    scale = np.max(np.abs(terms), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        relative = np.where(scale > 0, residual / np.where(scale > 0, scale, 1.0), 0.0)
    return residual, relative


def solve_initial_density(u0: float, v0: float, psi0: float, lam: float) -> float:
    """Radiation density closing the constraint for given expansion rates and scalar energy."""
    rho0 = (v0 * v0 + 2.0 * u0 * v0 - lam - EIGHT_PI * psi0) / EIGHT_PI
    if rho0 < 0:
        raise InfeasibleError(f"constraint requires negative density rho0 = {rho0:.6g}")
    return rho0


def solve_initial_u(v0: float, rho0: float, psi0: float, lam: float) -> float:
    """Expansion rate ``u0`` closing the constraint; needs ``v0 != 0``."""
    if v0 == 0:
        raise InfeasibleError("u0 is undetermined by the constraint when v0 = 0")
    return (lam + EIGHT_PI * (rho0 + psi0) - v0 * v0) / (2.0 * v0)


def classify(data: InitialData, tol: Tolerances = Tolerances()) -> ConstraintReport:
    """Initial-constraint status of Cauchy data."""
    return residual_physical(data.a0, data.a_dot0, data.b0, data.b_dot0,
                             data.rho0, data.phi_dot0, data.lam, tol)


def regime_ensemble(n: int, rng: np.random.Generator, lam_range=(0.0, 3.0),
                    psi_max: float = 0.1, rho_max: float = 0.1, v_max: float = 2.0,
                    u_range=(-1.0, 4.0), max_tries: int = 100_000) -> list[InitialData]:
    """Random constraint-satisfying data with ``Lambda >= 0``, ``v0 > 0``, ``rho0, psi0 > 0``.

    ``u0`` is drawn from ``u_range``; ``rho0`` then comes from
    :func:`solve_initial_density` and the draw is kept only when
    ``0 < rho0 <= rho_max``.
    """
    out: list[InitialData] = []
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries:
            raise InfeasibleError(f"only {len(out)} of {n} feasible draws after {max_tries} tries")
        lam = rng.uniform(*lam_range)
        # uniform on (0, max]
        psi0 = psi_max * (1.0 - rng.random())
        v0 = v_max * (1.0 - rng.random())
        u0 = rng.uniform(*u_range)
        try:
            rho0 = solve_initial_density(u0, v0, psi0, lam)
        except InfeasibleError:
            continue
        if not 0 < rho0 <= rho_max:
            continue
        out.append(InitialData.from_reduced(ReducedState(u0, v0, rho0, psi0, 0.0), lam))
    return out
