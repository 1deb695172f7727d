"""
Two exact solutions
===================

De Sitter space and the isotropic radiation universe both sit inside the
Bianchi I family, and both have closed forms. Integrating them is the
quickest way to see what the solver is worth.
"""
import math

import numpy as np

from bianchi import InitialData, ReducedState, SolverConfig, integrate

# %%
# De Sitter: with Lambda = 3 the rates u = v = 1 are an equilibrium and
# the scale factors grow like e^t.
data = InitialData.from_reduced(ReducedState(1.0, 1.0, 0.0, 0.0, 0.0), lam=3.0)
traj = integrate(data, SolverConfig(t_end=10.0, max_samples=11))
for t, a in zip(traj.times, traj.a):
    print(f"t = {t:4.1f}   a = {a:14.6f}   a e^-t - 1 = {a * math.exp(-t) - 1: .2e}")

# %%
# Radiation with no cosmological constant: u = v = 1/(1 + 2t) and
# a = sqrt(1 + 2t). The density that closes the constraint is 3/(8 pi).
data = InitialData.from_reduced(ReducedState(1.0, 1.0, 3.0 / (8.0 * math.pi), 0.0, 0.0), lam=0.0)
traj = integrate(data, SolverConfig(t_end=10.0))
s = 1.0 + 2.0 * traj.times
print("\nradiation: max relative error in u", np.max(np.abs(traj.u * s - 1)))
print("radiation: max relative error in a", np.max(np.abs(traj.a / np.sqrt(s) - 1)))
print(traj.meta["n_steps"], "steps,", traj.meta["n_rejected"], "rejected")
