"""
Watching the constraint and the conserved quantities
====================================================

The Hamiltonian constraint is not imposed during the evolution; it is
carried along by the equations. The densities also have exact first
integrals against the comoving volume a b^2. Both give free error
estimates for any run.
"""
import numpy as np

from bianchi import SolverConfig, Tolerances, drift, integrate, regime_ensemble

rng = np.random.default_rng(3)
data = regime_ensemble(1, rng)[0]
print(data)

# %%
# Relative constraint residual along the run.
traj = integrate(data, SolverConfig(t_end=20.0, max_samples=21))
for t, r in zip(traj.times, traj.diagnostics["constraint_relative"]):
    print(f"t = {t:5.1f}   relative residual = {r: .2e}")

# %%
# Drift of rho (a b^2)^(4/3), psi (a b^2)^2 and phi' a b^2. Tightening the
# tolerances by 16 should cut the drift by roughly the same factor.
for factor in (1, 1 / 16, 1 / 256):
    cfg = SolverConfig(t_end=20.0, max_samples=401, tolerances=Tolerances().scaled(factor))
    d = drift(integrate(data, cfg))
    print(f"tolerance x {factor:<8g} drift: " + "  ".join(f"{x:.2e}" for x in d))
