"""First integrals of the density equations and their numerical drift.

Both densities decay against the comoving volume ``a b^2``:
``rho (a b^2)^(4/3)`` and ``psi (a b^2)^2`` are exact constants of motion,
and so is ``phi' a b^2 = sqrt(2 psi) a b^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_types import ExtendedState, InvalidDataError, Trajectory

INVARIANTS = ("radiation_invariant", "scalar_invariant", "momentum_invariant")


@dataclass(frozen=True)
class ConservedSnapshot:
    radiation_invariant: float
    scalar_invariant: float
    momentum_invariant: float


def snapshot(state: ExtendedState) -> ConservedSnapshot:
    if state.a <= 0 or state.b <= 0:
        raise InvalidDataError("scale factors must be positive")
    r = state.reduced
    volume = state.a * state.b * state.b
    return ConservedSnapshot(
        r.rho * volume ** (4.0 / 3.0),
        r.psi * volume * volume,
        math.sqrt(2.0 * r.psi) * volume,
    )


def snapshot_arrays(states: np.ndarray) -> dict[str, np.ndarray]:
    """:func:`snapshot` over rows of an ``(n, 7)`` state array."""
    states = np.atleast_2d(states)
    rho, psi, a, b = states[:, 2], states[:, 3], states[:, 5], states[:, 6]
    volume = a * b * b
    return {
        "radiation_invariant": rho * volume ** (4.0 / 3.0),
        "scalar_invariant": psi * volume * volume,
        "momentum_invariant": np.sqrt(2.0 * np.maximum(psi, 0.0)) * volume,
    }


def _relative_drift(x: np.ndarray) -> float:
    x0 = x[0]
    dev = np.abs(x - x0)
    if x0 == 0:
        # 0/0 counts as no drift; anything else is reported in absolute terms
        return float(dev.max())
    return float(dev.max() / abs(x0))


def drift(traj: Trajectory) -> tuple[float, float, float]:
    """Largest relative deviation of each invariant from its initial value."""
    if len(traj) == 0:
        raise InvalidDataError("empty trajectory")
    values = snapshot_arrays(traj.states)
    return tuple(_relative_drift(values[k]) for k in INVARIANTS)
