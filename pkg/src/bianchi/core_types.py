"""State containers, initial data and tolerance records.

The integrators work on flat float arrays laid out as
``(u, v, rho, psi, phi, a, b)``; the dataclasses below are the typed view
of those arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

# column layout of an extended state vector
FIELDS = ("u", "v", "rho", "psi", "phi", "a", "b")
REDUCED_FIELDS = FIELDS[:5]
U, V, RHO, PSI, PHI, A, B = range(7)


class BianchiError(ValueError):
    """Base class for invalid input or infeasible requests."""


class InvalidDataError(BianchiError):
    pass


class InfeasibleError(BianchiError):
    pass


class RegimeViolation(BianchiError):
    pass


def _require_finite(**values: float) -> None:
    for name, x in values.items():
        if not math.isfinite(x):
            raise InvalidDataError(f"{name} must be finite, got {x!r}")


@dataclass(frozen=True)
class ReducedState:
    """Expansion rates ``u = a'/a``, ``v = b'/b``, radiation density, ``psi = phi'^2 / 2``, field."""

    u: float
    v: float
    rho: float
    psi: float
    phi: float

    def __post_init__(self):
        _require_finite(u=self.u, v=self.v, rho=self.rho, psi=self.psi, phi=self.phi)
        if self.rho < 0:
            raise InvalidDataError(f"rho must be >= 0, got {self.rho}")
        if self.psi < 0:
            raise InvalidDataError(f"psi must be >= 0, got {self.psi}")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.rho, self.psi, self.phi], dtype=float)


@dataclass(frozen=True)
class ExtendedState:
    reduced: ReducedState
    a: float
    b: float

    def __post_init__(self):
        _require_finite(a=self.a, b=self.b)
        if self.a <= 0 or self.b <= 0:
            raise InvalidDataError(f"scale factors must be positive, got a={self.a}, b={self.b}")

    @classmethod
    def from_array(cls, y) -> "ExtendedState":
        u, v, rho, psi, phi, a, b = (float(x) for x in y)
        return cls(ReducedState(u, v, rho, psi, phi), a, b)

    def as_array(self) -> np.ndarray:
        r = self.reduced
        return np.array([r.u, r.v, r.rho, r.psi, r.phi, self.a, self.b], dtype=float)


@dataclass(frozen=True)
class InitialData:
    """Cauchy data ``a(0), a'(0), b(0), b'(0), phi(0), phi'(0), rho(0)`` and the cosmological constant.

    ``phi_dot0 = 0`` is admitted here so that vacuum and exact-solution runs
    can be expressed; :func:`from_physical` rejects it unless asked not to.
    """

    a0: float
    a_dot0: float
    b0: float
    b_dot0: float
    phi0: float
    phi_dot0: float
    rho0: float
    lam: float = 0.0

    def __post_init__(self):
        _require_finite(
            a0=self.a0, a_dot0=self.a_dot0, b0=self.b0, b_dot0=self.b_dot0,
            phi0=self.phi0, phi_dot0=self.phi_dot0, rho0=self.rho0, lam=self.lam,
        )
        if self.a0 <= 0:
            raise InvalidDataError(f"a0 must be > 0, got {self.a0}")
        if self.b0 <= 0:
            raise InvalidDataError(f"b0 must be > 0, got {self.b0}")
        if self.phi_dot0 < 0:
            raise InvalidDataError(f"phi_dot0 must be >= 0 (non-decreasing field), got {self.phi_dot0}")
        if self.rho0 < 0:
            raise InvalidDataError(f"rho0 must be >= 0, got {self.rho0}")

    @property
    def in_global_regime(self) -> bool:
        """Lambda >= 0 and b'(0) > 0, the hypotheses of the global existence result."""
        return self.lam >= 0 and self.b_dot0 > 0

    @classmethod
    def from_reduced(cls, state: ReducedState, lam: float, a0: float = 1.0,
                     b0: float = 1.0) -> "InitialData":
        return cls(
            a0=a0, a_dot0=state.u * a0, b0=b0, b_dot0=state.v * b0,
            phi0=state.phi, phi_dot0=math.sqrt(2.0 * state.psi),
            rho0=state.rho, lam=lam,
        )


def from_physical(data: InitialData, allow_vacuum: bool = False) -> ReducedState:
    """Map Cauchy data to the first-order variables.

    ``psi0 = phi_dot0**2 / 2``. With ``allow_vacuum=False`` a static scalar
    field (``phi_dot0 == 0``) is rejected, since the local existence
    argument divides by ``sqrt(2 psi)``.
    """
    if data.a0 <= 0 or data.b0 <= 0:
        raise InvalidDataError("scale factors must be positive")
    if data.phi_dot0 < 0 or (data.phi_dot0 == 0 and not allow_vacuum):
        raise InvalidDataError(f"phi_dot0 must be > 0, got {data.phi_dot0}")
    return ReducedState(
        u=data.a_dot0 / data.a0,
        v=data.b_dot0 / data.b0,
        rho=data.rho0,
        psi=0.5 * data.phi_dot0 ** 2,
        phi=data.phi0,
    )


def initial_vector(data: InitialData) -> np.ndarray:
    s = from_physical(data, allow_vacuum=True)
    return np.array([s.u, s.v, s.rho, s.psi, s.phi, data.a0, data.b0], dtype=float)


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    constraint_warn: float = 1e-8
    constraint_fail: float = 1e-5

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "constraint_warn", "constraint_fail"):
            x = getattr(self, name)
            if not (x > 0 and math.isfinite(x)):
                raise InvalidDataError(f"{name} must be a positive finite number, got {x!r}")
        if self.constraint_warn > self.constraint_fail:
            raise InvalidDataError("constraint_warn must not exceed constraint_fail")

    def scaled(self, factor: float) -> "Tolerances":
        """Integration tolerances multiplied by ``factor``; constraint thresholds unchanged."""
        return Tolerances(self.abs_tol * factor, self.rel_tol * factor,
                          self.constraint_warn, self.constraint_fail)


@dataclass
class Trajectory:
    """Sampled solution. ``states`` has shape ``(n_samples, 7)`` in ``FIELDS`` order.

    ``diagnostics`` maps a column name to a per-sample array; ``meta`` holds
    solver name, step-control settings, counters and the termination reason.
    """

    times: np.ndarray
    states: np.ndarray
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != len(FIELDS):
            raise InvalidDataError(f"states must have shape (n, {len(FIELDS)})")
        if len(self.times) != len(self.states):
            raise InvalidDataError("times and states differ in length")
        if len(self.times) and self.times[0] != 0.0:
            raise InvalidDataError("trajectories start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidDataError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, FIELDS.index(name)]

    u = property(lambda self: self.states[:, U])
    v = property(lambda self: self.states[:, V])
    rho = property(lambda self: self.states[:, RHO])
    psi = property(lambda self: self.states[:, PSI])
    phi = property(lambda self: self.states[:, PHI])
    a = property(lambda self: self.states[:, A])
    b = property(lambda self: self.states[:, B])

    def state(self, i: int) -> ExtendedState:
        return ExtendedState.from_array(self.states[i])

    @property
    def termination(self) -> str:
        return self.meta.get("termination", "completed")

    @property
    def completed(self) -> bool:
        return self.termination == "completed"
