"""Acceptance gate: each test checks one criterion at its stated tolerance
and records a PASS/FAIL line shown in the terminal summary."""
import math

import numpy as np
import pytest

from bianchi import (
    RiccatiParams, SolverConfig, Tolerances, certify, drift, integrate, regime_ensemble,
    riccati_closed_form, run_scheme,
)
from bianchi.bounds import envelope_constant, envelope_w, riccati_numerical

from conftest import de_sitter, radiation

SEED = 20240611
ENSEMBLE_SIZE = 100
T_END = 20.0
SAMPLES = 401


@pytest.fixture(scope="module")
def ensemble():
    return regime_ensemble(ENSEMBLE_SIZE, np.random.default_rng(SEED))


@pytest.fixture(scope="module")
def runs(ensemble):
    cfg = SolverConfig(t_end=T_END, max_samples=SAMPLES)
    return [integrate(d, cfg) for d in ensemble]


def test_de_sitter_fixed_point(report_criterion):
    tr = integrate(de_sitter(3.0), SolverConfig(t_end=10.0))
    du = max(np.max(np.abs(tr.u - 1)), np.max(np.abs(tr.v - 1)))
    growth = np.exp(tr.times)
    da = max(np.max(np.abs(tr.a / growth - 1)), np.max(np.abs(tr.b / growth - 1)))
    ok = tr.completed and du <= 1e-10 and da <= 1e-8
    report_criterion(1, "de Sitter fixed point", ok, f"max|u-1|,|v-1| = {du:.2e}, a,b vs e^t rel = {da:.2e}")
    assert ok


def test_radiation_flrw(report_criterion):
    tr = integrate(radiation(1.0), SolverConfig(t_end=10.0))
    s = 1 + 2 * tr.times
    eu = np.max(np.abs(tr.u * s - 1))
    ea = np.max(np.abs(tr.a / np.sqrt(s) - 1))
    ok = tr.completed and eu <= 1e-8 and ea <= 1e-6
    report_criterion(2, "radiation FLRW", ok, f"u rel err = {eu:.2e}, a rel err = {ea:.2e}")
    assert ok


def test_constraint_propagation(runs, report_criterion):
    worst = max(float(np.max(np.abs(tr.diagnostics["constraint_relative"]))) for tr in runs)
    ok = all(tr.completed for tr in runs) and worst <= 1e-8
    report_criterion(3, "constraint propagation", ok,
                     f"{len(runs)} runs to t={T_END:g}, max relative residual = {worst:.2e}")
    assert ok


def test_conserved_drift(ensemble, runs, report_criterion):
    loose = np.array([drift(tr)[:2] for tr in runs])
    tight_cfg = SolverConfig(t_end=T_END, max_samples=SAMPLES, tolerances=Tolerances().scaled(1 / 16))
    tight = np.array([drift(integrate(d, tight_cfg))[:2] for d in ensemble])
    worst = loose.max(axis=0)
    ratio = worst / tight.max(axis=0)
    ok = bool(np.all(worst <= 1e-8) and np.all(ratio >= 8))
    report_criterion(4, "conserved-quantity drift", ok,
                     f"max drift radiation {worst[0]:.2e}, scalar {worst[1]:.2e}; "
                     f"reduction at 16x tolerance: {ratio[0]:.1f}x, {ratio[1]:.1f}x")
    assert ok


def test_certificates(ensemble, runs, report_criterion):
    certs = [certify(tr, d) for tr, d in zip(runs, ensemble)]
    failed = [i for i, c in enumerate(certs) if not c.passed]
    worst = min(min(c.margin for c in cert.conditions) for cert in certs)
    ok = not failed
    report_criterion(5, "global existence certificate", ok,
                     f"{len(certs) - len(failed)}/{len(certs)} pass, smallest margin {worst:.2e}")
    assert ok, [certs[i].failures() for i in failed]


def test_riccati_closed_form(report_criterion):
    rng = np.random.default_rng(SEED)
    t = np.linspace(0.0, 10.0, 201)
    worst = 0.0
    for _ in range(100):
        K = 5.0 * (1.0 - rng.random())
        alpha = 3.0 * (1.0 - rng.random())
        p = RiccatiParams(K, alpha, rng.uniform(0.0, 10.0), 0.0)
        closed = riccati_closed_form(p, t)
        num = riccati_numerical(p, t)
        dev = np.abs(closed - num)
        rel = np.where(closed != 0, dev / np.where(closed != 0, np.abs(closed), 1.0), dev)
        worst = max(worst, float(rel.max()))
    tanh_err = float(np.max(np.abs(riccati_closed_form(RiccatiParams(2.0, 1.0, 0.0, 0.0), t)
                                   - 2 * np.tanh(2 * t))))
    ok = worst <= 1e-8 and tanh_err <= 1e-12
    report_criterion(6, "Riccati closed form", ok,
                     f"max rel deviation over 100 draws = {worst:.2e}, 2 tanh(2t) error = {tanh_err:.2e}")
    assert ok


def test_picard_convergence(report_criterion):
    d = radiation(1.0)
    grid, rep = run_scheme(d, T=0.1, grid_points=512)
    t = grid.times
    s = 1 + 2 * t
    exact = np.array([1 / s, 1 / s, d.rho0 / s ** 2, 0 * t, 0 * t])
    err = float(np.max(np.abs(grid.values[-1] - exact)))
    bound_ok = all(b <= bd * (1 + 1e-9) or b <= rep.noise_floor
                   for n, b, bd in zip(rep.orders, rep.betas, rep.bounds) if n >= 4)
    _, ds = run_scheme(de_sitter(3.0), T=0.1, grid_points=512)
    ok = rep.converged and err <= 1e-6 and bound_ok and ds.beta2 <= 1e-14
    report_criterion(7, "Picard convergence", ok,
                     f"sup error = {err:.2e} after {len(grid.values) - 1} iterations, "
                     f"factorial bound {'holds' if bound_ok else 'violated'} (C = {rep.fitted_C2:.3g}), "
                     f"de Sitter beta_2 = {ds.beta2:.1e}")
    assert ok


def test_asymptotic_attractor(report_criterion):
    members = regime_ensemble(ENSEMBLE_SIZE, np.random.default_rng(SEED + 1), lam_range=(3.0, 3.0))
    cfg = SolverConfig(t_end=50.0, max_samples=101)
    worst_uv = worst_hw = worst_wc = -math.inf
    for d in members:
        tr = integrate(d, cfg)
        assert tr.completed and tr.times[-1] == 50.0
        worst_uv = max(worst_uv, abs(tr.u[-1] - 1), abs(tr.v[-1] - 1))
        H = tr.u[-1] + 2 * tr.v[-1]
        W = envelope_w(d.rho0, d.lam, tr.u[0] + 2 * tr.v[0], 50.0)
        worst_hw = max(worst_hw, (H - W) / W)
        worst_wc = max(worst_wc, W - envelope_constant(d.rho0, d.lam))
    ok = worst_uv <= 1e-6 and worst_hw <= 10 * Tolerances().constraint_warn and worst_wc <= 1e-6
    report_criterion(8, "asymptotic attractor", ok,
                     f"max |u-1|,|v-1| at t=50 = {worst_uv:.2e}, max (H-W)/W = {worst_hw:.2e}, "
                     f"max W-C0 = {worst_wc:.2e}")
    assert ok


def test_two_solver_agreement(ensemble, runs, report_criterion):
    cfg = SolverConfig(method="fixed_rk4", initial_step=4e-3, t_end=T_END, max_samples=SAMPLES)
    reduced = scale = 0.0
    for d, tr in zip(ensemble, runs):
        ref = integrate(d, cfg)
        reduced = max(reduced, float(np.max(np.abs(tr.states[:, :5] - ref.states[:, :5]))))
        # scale factors grow like e^t, so they are compared relatively
        scale = max(scale, float(np.max(np.abs(tr.states[:, 5:] / ref.states[:, 5:] - 1))))
    ok = reduced <= 1e-6 and scale <= 1e-6
    report_criterion(9, "adaptive vs fixed-step agreement", ok,
                     f"sup |diff| (u,v,rho,psi,phi) = {reduced:.2e}, a,b rel = {scale:.2e}")
    assert ok
