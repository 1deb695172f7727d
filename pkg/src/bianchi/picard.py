"""Successive approximations for the reduced system on a fixed grid.

Iterate ``S_{n+1}(t) = S_0 + int_0^t F(S_n(s)) ds`` starting from the
constant function ``S_0``; every iterate shares the same initial value.
``beta_n(t)`` is the summed absolute difference between ``S_{n+1}`` and
``S_n`` over the five components, and its sup over the grid is what the
contraction estimate controls:

    beta_n <= ||beta_2|| (C zeta)^(n-2) / (n-2)!,    0 <= t <= zeta.

The constant ``C`` is fitted from the one-step relation
``beta_n(t) <= C int_0^t beta_{n-1}`` measured on the iterates, so the
factorial bound is a genuine consequence to check rather than a fit.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from .constraint import EIGHT_PI
from .core_types import BianchiError, InitialData, REDUCED_FIELDS, from_physical
from .evolution import _rhs_values

log = logging.getLogger(__name__)


class DivergenceError(BianchiError):
    pass


def _F(S: np.ndarray, lam: float) -> np.ndarray:
    """Reduced right-hand side on a ``(5, n)`` array; ``psi`` clamped at zero under the root."""
    u, v, rho, psi, _ = S
    du, dv, drho, dpsi, _, _ = _rhs_values(u, v, rho, psi, 0.0, 0.0, lam)
    return np.array([du, dv, drho, dpsi, np.sqrt(2.0 * np.maximum(psi, 0.0))])


def _cumulative(f: np.ndarray, times: np.ndarray) -> np.ndarray:
    return cumulative_simpson(f, x=times, axis=-1, initial=0.0)


@dataclass
class IterateGrid:
    """Iterates on a uniform grid; ``values[n]`` is ``S_n`` as a ``(5, n_points)`` array."""

    times: np.ndarray
    values: list[np.ndarray] = field(default_factory=list)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def component(self, n: int, name: str) -> np.ndarray:
        return self.values[n][REDUCED_FIELDS.index(name)]


@dataclass
class ContractionReport:
    """``betas[k]`` is ``beta_{orders[k]}``; orders start at 2."""

    betas: list[float]
    orders: list[int]
    fitted_C2: float
    factorial_bound_ok: bool
    bounds: list[float]
    converged: bool
    noise_floor: float
    refinement_ok: bool | None = None

    @property
    def beta2(self) -> float:
        return self.betas[0]


def _grid(T: float, grid_points: int) -> np.ndarray:
    if grid_points < 3:
        raise BianchiError(f"need at least 3 grid points, got {grid_points}")
    if not (T > 0 and math.isfinite(T)):
        raise BianchiError(f"horizon must be positive and finite, got {T}")
    return np.linspace(0.0, T, grid_points)


def initial_iterate(data: InitialData, times: np.ndarray) -> np.ndarray:
    s0 = from_physical(data, allow_vacuum=True).as_array()
    return np.repeat(s0[:, None], len(times), axis=1)


def picard_step(prev: np.ndarray, times: np.ndarray, data: InitialData) -> np.ndarray:
    """One successive approximation: ``S_0 + int_0^t F(prev)``, composite Simpson."""
    times = np.asarray(times, dtype=float)
    if len(times) < 3:
        raise BianchiError(f"need at least 3 grid points, got {len(times)}")
    prev = np.asarray(prev, dtype=float)
    if np.any(prev[3] < 0):
        raise BianchiError("psi component of the previous iterate is negative")
    s0 = from_physical(data, allow_vacuum=True).as_array()
    return s0[:, None] + _cumulative(_F(prev, data.lam), times)


def _beta_fn(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b).sum(axis=0)


def _fit_constant(beta_fns: list[np.ndarray], times: np.ndarray, floor: float) -> float:
    """Smallest C with ``beta_n(t) <= C int_0^t beta_{n-1}`` on the grid, above the noise floor."""
    best = 0.0
    for prev, cur in zip(beta_fns[:-1], beta_fns[1:]):
        if cur.max() <= 1e3 * floor or prev.max() <= 1e3 * floor:
            continue
        integral = _cumulative(prev, times)
        ok = (integral > 1e3 * floor) & (cur > 1e3 * floor)
        if np.any(ok):
            best = max(best, float(np.max(cur[ok] / integral[ok])))
    return best


def run_scheme(data: InitialData, T: float | None = None, n_max: int = 60,
               grid_points: int = 512, abs_tol: float = 1e-13,
               check_refinement: bool = False) -> tuple[IterateGrid, ContractionReport]:
    """Iterate until ``beta_n < abs_tol`` (computing at least ``beta_2``) or ``n_max``.

    ``T`` defaults to :func:`pick_horizon`. With ``check_refinement`` the
    scheme is repeated on a doubled grid and ``refinement_ok`` records
    whether every reported beta above the noise floor moved by less than 1%.
    """
    if T is None:
        T = pick_horizon(data)
    times = _grid(T, grid_points)
    grid = IterateGrid(times, [initial_iterate(data, times)])
    scale = max(1.0, float(np.abs(grid.values[0]).max()))
    floor = 64 * np.finfo(float).eps * scale * len(REDUCED_FIELDS)

    beta_fns: list[np.ndarray] = []
    betas_all: list[float] = []
    converged = False
    for n in range(n_max + 1):
        nxt = picard_step(grid.values[-1], times, data)
        grid.values.append(nxt)
        bf = _beta_fn(nxt, grid.values[-2])
        beta_fns.append(bf)
        beta = float(bf.max())
        betas_all.append(beta)
        if not math.isfinite(beta):
            raise DivergenceError(f"beta_{n} is not finite")
        if n >= 2:
            if beta > 1e6 * max(betas_all[2], floor):
                raise DivergenceError(f"beta_{n} = {beta:.3e} exceeds 1e6 * beta_2")
            if beta < abs_tol:
                converged = True
                break

    C = _fit_constant(beta_fns, times, floor)
    beta2 = betas_all[2]
    orders = list(range(2, len(betas_all)))
    bounds = [beta2 * (C * T) ** (n - 2) / math.factorial(n - 2) for n in orders]
    # below the rounding floor the iterates cannot resolve the bound
    ok = all(b <= bd * (1 + 1e-9) or b <= floor for b, bd in zip(betas_all[2:], bounds))
    report = ContractionReport(
        betas=betas_all[2:], orders=orders, fitted_C2=C, factorial_bound_ok=ok,
        bounds=bounds, converged=converged, noise_floor=floor,
    )
    if check_refinement:
        _, fine = run_scheme(data, T, n_max, 2 * grid_points - 1, abs_tol)
        pairs = [(a, b) for a, b in zip(report.betas, fine.betas) if a > 1e3 * floor]
        report.refinement_ok = all(abs(a - b) <= 0.01 * a for a, b in pairs)
    return grid, report


def psi_lower_bound_check(iterates: IterateGrid, data: InitialData) -> bool:
    """Every iterate keeps ``psi >= psi0 / 2`` on ``[0, psi0 / (2C)]``.

    ``C`` is the largest ``|2 (u_n + 2 v_n) psi_n|`` seen on the iterates.
    """
    psi0 = 0.5 * data.phi_dot0 ** 2
    if psi0 <= 0:
        raise BianchiError("psi lower bound needs psi0 > 0")
    C = 0.0
    for S in iterates.values:
        C = max(C, float(np.max(np.abs(2.0 * (S[0] + 2.0 * S[1]) * S[3]))))
    horizon = math.inf if C == 0 else psi0 / (2.0 * C)
    window = iterates.times <= horizon
    return all(bool(np.all(S[3][window] >= 0.5 * psi0)) for S in iterates.values)


def _abs_range(lo: float, hi: float) -> float:
    return max(abs(lo), abs(hi))


def pick_horizon(data: InitialData, radius: float = 1.0) -> float:
    """Horizon ``T = 0.5 / max_i B_i`` with ``B_i`` bounding ``|F_i|`` on ``|S - S_0|_inf <= radius``.

    The bounds are interval-arithmetic over the box (``rho`` and ``psi``
    restricted to nonnegative values), so each ``B_i`` is at least the true
    supremum and ``B_i T < radius`` holds with room to spare.
    """
    s = from_physical(data, allow_vacuum=True)
    lam = data.lam
    U = _abs_range(s.u - radius, s.u + radius)
    V = _abs_range(s.v - radius, s.v + radius)
    R = s.rho + radius
    P = s.psi + radius
    H = U + 2.0 * V
    B = [
        2.0 / 3.0 * abs(lam) + U * U + V * V / 3.0 + 4.0 / 3.0 * U * V + EIGHT_PI / 3.0 * P,
        2.0 / 3.0 * abs(lam) + 5.0 / 3.0 * V * V + U * V / 3.0 + EIGHT_PI / 3.0 * P,
        4.0 / 3.0 * H * R,
        2.0 * H * P,
        math.sqrt(2.0 * P),
    ]
    return 0.5 * radius / max(B)
