import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bianchi import (
    ExtendedState, InitialData, InvalidDataError, ReducedState, SolverConfig, Tolerances,
    integrate, regime_ensemble, rhs,
)
from bianchi.evolution import rhs_array

from conftest import de_sitter, radiation, zero_state


def _state(u, v, rho=0.0, psi=0.0, phi=0.0, a=1.0, b=1.0):
    return ExtendedState(ReducedState(u, v, rho, psi, phi), a, b)


def test_rhs_zero_state():
    d = rhs(_state(0, 0), 0.0)
    assert d.as_array().tolist() == [0.0] * 7


def test_rhs_de_sitter_fixed_point():
    d = rhs(_state(1, 1), 3.0)
    assert d.du == pytest.approx(0, abs=1e-15) and d.dv == pytest.approx(0, abs=1e-15)
    assert (d.da, d.db, d.drho, d.dpsi, d.dphi) == (1, 1, 0, 0, 0)


def test_rhs_density_rate():
    assert rhs(_state(0.5, 1, rho=0.1), 0.0).drho == pytest.approx(-1 / 3, rel=1e-15)


def test_rhs_rejects_bad_state():
    with pytest.raises(InvalidDataError):
        rhs(_state(math.nan, 0), 0.0)
    with pytest.raises(InvalidDataError):
        rhs(_state(0, 0), math.inf)


def test_rhs_array_matches_scalar(rng):
    for _ in range(20):
        y = np.concatenate([rng.normal(size=2), rng.random(2), rng.normal(size=1), rng.random(2) + 0.1])
        lam = rng.uniform(-1, 3)
        assert np.allclose(rhs_array(y, lam), rhs(ExtendedState.from_array(y), lam).as_array(),
                           rtol=1e-15, atol=0)


def _reference_rhs(lam):
    pi = math.pi

    def f(t, y):
        u, v, rho, psi, phi, a, b = y
        return [
            2 * lam / 3 - u ** 2 + v ** 2 / 3 - 4 * u * v / 3 - 8 * pi * psi / 3,
            2 * lam / 3 - 5 * v ** 2 / 3 - u * v / 3 - 8 * pi * psi / 3,
            -4 * (u + 2 * v) * rho / 3,
            -2 * (u + 2 * v) * psi,
            math.sqrt(2 * max(psi, 0.0)),
            u * a,
            v * b,
        ]
    return f


def test_de_sitter_exact():
    tr = integrate(de_sitter(), SolverConfig(t_end=10.0, max_samples=1001))
    assert tr.completed
    assert np.max(np.abs(tr.u - 1)) <= 1e-10 and np.max(np.abs(tr.v - 1)) <= 1e-10
    assert np.max(np.abs(tr.a / np.exp(tr.times) - 1)) <= 1e-8
    assert np.max(np.abs(tr.b / np.exp(tr.times) - 1)) <= 1e-8


def test_radiation_exact():
    w0 = 1.0
    tr = integrate(radiation(w0), SolverConfig(t_end=10.0, max_samples=501))
    exact = w0 / (1 + 2 * w0 * tr.times)
    assert np.max(np.abs(tr.u / exact - 1)) <= 1e-8


def test_zero_state_constant():
    tr = integrate(zero_state(), SolverConfig(t_end=5.0, max_samples=11))
    assert np.all(tr.states == tr.states[0])


def test_agrees_with_reference_integrator(rng):
    for d in regime_ensemble(5, rng):
        tr = integrate(d, SolverConfig(t_end=5.0, max_samples=51))
        ref = solve_ivp(_reference_rhs(d.lam), (0, 5), tr.states[0], method="DOP853",
                        t_eval=tr.times, rtol=1e-13, atol=1e-14)
        rel = np.abs(tr.states - ref.y.T) / np.maximum(1.0, np.abs(ref.y.T))
        assert rel.max() < 1e-8


def test_constraint_propagates(rng):
    for d in regime_ensemble(5, rng):
        tr = integrate(d, SolverConfig(t_end=20.0, max_samples=201))
        assert np.max(np.abs(tr.diagnostics["constraint_relative"])) <= Tolerances().constraint_warn


def test_sign_preservation(rng):
    for d in regime_ensemble(5, rng):
        tr = integrate(d, SolverConfig(t_end=20.0, max_samples=201))
        assert np.all(tr.rho > 0) and np.all(tr.psi > 0)


def test_rk4_order_on_radiation():
    d = radiation(1.0)
    errs = []
    for h in (0.02, 0.01, 0.005):
        tr = integrate(d, SolverConfig(method="fixed_rk4", initial_step=h, min_step=1e-6,
                                       t_end=2.0, max_samples=3))
        errs.append(abs(tr.u[-1] - 1 / 5))
    rates = [math.log2(e0 / e1) for e0, e1 in zip(errs, errs[1:])]
    assert min(rates) >= 3.8


def test_adaptive_error_tracks_tolerance():
    d = radiation(1.0)
    errs = []
    for k in range(4):
        tol = Tolerances(abs_tol=1e-8 / 16 ** k, rel_tol=1e-6 / 16 ** k)
        tr = integrate(d, SolverConfig(t_end=10.0, max_samples=2, tolerances=tol))
        errs.append(np.max(np.abs(tr.u - 1 / (1 + 2 * tr.times))))
    for e0, e1 in zip(errs, errs[1:]):
        assert e1 < e0 / 4


def test_adaptive_vs_rk4(rng):
    for d in regime_ensemble(3, rng):
        a = integrate(d, SolverConfig(t_end=10.0, max_samples=101))
        b = integrate(d, SolverConfig(method="fixed_rk4", initial_step=4e-3, t_end=10.0, max_samples=101))
        assert np.allclose(a.times, b.times)
        assert np.max(np.abs(a.states[:, :5] - b.states[:, :5])) < 10 * 1e-8


def test_blow_up_detected():
    # negative cosmological constant recollapses in finite time
    d = InitialData.from_reduced(ReducedState(1.0, 1.0, 13 / (8 * math.pi), 0.0, 0.0), -10.0)
    tr = integrate(d, SolverConfig(t_end=50.0, max_samples=101))
    assert tr.termination in ("blow-up detected", "step underflow")
    assert tr.times[-1] < 50.0


def test_step_underflow():
    d = InitialData.from_reduced(ReducedState(1.0, 1.0, 13 / (8 * math.pi), 0.0, 0.0), -10.0)
    tr = integrate(d, SolverConfig(t_end=50.0, max_samples=101, min_step=1e-3, initial_step=1e-2,
                                   blowup_ceiling=1e300))
    assert tr.termination == "step underflow"


def test_projection_mode_keeps_constraint():
    d = InitialData.from_reduced(ReducedState(2.0, 1.0, 0.0, 0.01, 0.0), 1.0)
    d = InitialData(d.a0, d.a_dot0, d.b0, d.b_dot0, 0.0, d.phi_dot0,
                    (1 + 4 - 1 - 8 * math.pi * 0.5 * d.phi_dot0 ** 2) / (8 * math.pi), 1.0)
    tr = integrate(d, SolverConfig(t_end=5.0, max_samples=51, project_rho=True))
    assert np.max(np.abs(tr.diagnostics["constraint_relative"])) < 1e-14


def test_phi_non_decreasing(rng):
    d = regime_ensemble(1, rng)[0]
    tr = integrate(d, SolverConfig(t_end=10.0, max_samples=201))
    assert np.all(np.diff(tr.phi) >= 0)


def test_solver_config_validation():
    with pytest.raises(InvalidDataError):
        SolverConfig(initial_step=1.0, max_step=0.1)
    with pytest.raises(InvalidDataError):
        SolverConfig(max_samples=1)
    with pytest.raises(ValueError):
        SolverConfig(method="euler")


def test_meta_and_diagnostics():
    tr = integrate(de_sitter(), SolverConfig(t_end=1.0, max_samples=11))
    assert tr.meta["solver"] == "adaptive" and tr.meta["n_steps"] >= 10
    for key in ("constraint_residual", "H", "W", "radiation_invariant", "scalar_invariant"):
        assert len(tr.diagnostics[key]) == len(tr)
    assert np.allclose(tr.diagnostics["W"], 3.0)
