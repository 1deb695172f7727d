"""Physical quantities from a reduced trajectory, and residuals of the
original second-order field equations evaluated on them.

Second derivatives come from second-order differences of the exact first
derivatives ``a' = u a``, ``b' = v b``, ``phi' = sqrt(2 psi)``: centred in the
interior, one-sided at the two end samples (flagged in ``endpoint``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .constraint import EIGHT_PI
from .core_types import BianchiError, InitialData, Tolerances, Trajectory

FOUR_PI = 4.0 * math.pi

RESIDUALS = ("hamiltonian", "b_evolution", "a_evolution", "wave", "radiation", "radiation_uv")


class PhysicalSample(NamedTuple):
    t: float
    a: float
    b: float
    phi: float
    phi_dot: float
    rho: float


@dataclass
class PhysicalTrajectory:
    """Scale factors, scalar field and density with per-sample field-equation residuals.

    ``residuals`` keys:

    - ``hamiltonian``: ``(b'/b)^2 + 2 (a'/a)(b'/b) - Lambda - 8 pi rho - 4 pi phi'^2``
    - ``b_evolution``: ``(b'/b)^2 + 2 b''/b - Lambda + 8 pi rho / 3 + 4 pi phi'^2``
    - ``a_evolution``: ``a''/a + a'b'/(ab) + b''/b - Lambda + 8 pi rho / 3 + 4 pi phi'^2``
    - ``wave``: ``phi'' phi' + (a'/a + 2 b'/b) phi'^2``; NaN where ``psi <= abs_tol``
    - ``radiation``: ``rho' + (4/3)(a'/a + 2 b'/b) rho``
    - ``radiation_uv``: ``rho' + (4/3)(a'/a + b'/b) rho``. Diagnostic only:
      energy conservation in the ``a b^2`` volume gives the ``u + 2v`` form,
      so this one is nonzero on true solutions with matter.
    """

    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    phi: np.ndarray
    phi_dot: np.ndarray
    rho: np.ndarray
    residuals: dict[str, np.ndarray] = field(default_factory=dict)
    endpoint: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.times)

    def sample(self, i: int) -> PhysicalSample:
        return PhysicalSample(float(self.times[i]), float(self.a[i]), float(self.b[i]),
                              float(self.phi[i]), float(self.phi_dot[i]), float(self.rho[i]))


def reconstruct(traj: Trajectory, data: InitialData,
                tol: Tolerances = Tolerances()) -> PhysicalTrajectory:
    if len(traj) < 5:
        raise BianchiError(f"need at least 5 samples for the difference stencils, got {len(traj)}")
    if np.any(traj.psi < 0):
        raise BianchiError("psi is negative somewhere on the trajectory")
    t = traj.times
    u, v, rho, psi = traj.u, traj.v, traj.rho, traj.psi
    a, b = traj.a, traj.b
    if np.any(a <= 0) or np.any(b <= 0):
        raise BianchiError("scale factors must stay positive")
    lam = data.lam

    phi_dot = np.sqrt(2.0 * psi)
    a_dot, b_dot = u * a, v * b
    a_ddot = np.gradient(a_dot, t, edge_order=2)
    b_ddot = np.gradient(b_dot, t, edge_order=2)
    phi_ddot = np.gradient(phi_dot, t, edge_order=2)
    rho_dot = np.gradient(rho, t, edge_order=2)

    source = 8.0 / 3.0 * math.pi * rho + FOUR_PI * phi_dot ** 2
    wave = phi_ddot * phi_dot + (u + 2.0 * v) * phi_dot ** 2
    wave = np.where(psi > tol.abs_tol, wave, np.nan)
    residuals = {
        "hamiltonian": v * v + 2.0 * u * v - lam - EIGHT_PI * rho - FOUR_PI * phi_dot ** 2,
        "b_evolution": v * v + 2.0 * b_ddot / b - lam + source,
        "a_evolution": a_ddot / a + u * v + b_ddot / b - lam + source,
        "wave": wave,
        "radiation": rho_dot + 4.0 / 3.0 * (u + 2.0 * v) * rho,
        "radiation_uv": rho_dot + 4.0 / 3.0 * (u + v) * rho,
    }
    endpoint = np.zeros(len(t), dtype=bool)
    endpoint[[0, -1]] = True
    return PhysicalTrajectory(t.copy(), a.copy(), b.copy(), traj.phi.copy(), phi_dot, rho.copy(),
                              residuals, endpoint)


def metric_coefficients(sample: PhysicalSample) -> tuple[float, float, float, float]:
    """Diagonal of the metric ``(g_tt, g_11, g_22, g_33)``."""
    return (-1.0, sample.a ** 2, sample.b ** 2, sample.b ** 2)


def line_element(sample: PhysicalSample) -> str:
    _, a2, b2, _ = metric_coefficients(sample)
    return f"ds^2 = -dt^2 + {a2:.17g} (dx1)^2 + {b2:.17g} [(dx2)^2 + (dx3)^2]"
