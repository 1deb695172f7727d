"""Spatially homogeneous Einstein-scalar field system with a cosmological
constant on Bianchi type I spacetime: simulation, constraint monitoring,
successive approximations and global-existence certificates."""

from .core_types import (
    BianchiError, ExtendedState, InfeasibleError, InitialData, InvalidDataError,
    ReducedState, RegimeViolation, Tolerances, Trajectory, from_physical,
)
from .constraint import (
    ConstraintReport, classify, regime_ensemble, residual_physical, residual_reduced,
    solve_initial_density, solve_initial_u,
)
from .evolution import Derivative, Method, SolverConfig, integrate, rhs
from .conserved import ConservedSnapshot, drift, snapshot
from .bounds import (
    Certificate, DegenerateError, PoleError, RiccatiParams, certify, envelope_w,
    expansion_scalar, riccati_closed_form,
)
from .picard import (
    ContractionReport, DivergenceError, IterateGrid, pick_horizon, picard_step,
    psi_lower_bound_check, run_scheme,
)
from .reconstruct import PhysicalTrajectory, line_element, metric_coefficients

__version__ = "0.1.0"
