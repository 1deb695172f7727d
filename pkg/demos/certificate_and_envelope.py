"""
Certifying global behaviour
===========================

For Lambda >= 0, positive densities and b' > 0 the solution exists for all
time, and along the way a handful of inequalities hold: v and v + 2u stay
positive, both densities decay, and the mean expansion H = u + 2v stays
below the Riccati envelope W. The certificate checks each of them on a
sampled trajectory.
"""
import numpy as np

from bianchi import RiccatiParams, SolverConfig, certify, integrate, regime_ensemble, riccati_closed_form
from bianchi.bounds import envelope_constant

rng = np.random.default_rng(11)
data = regime_ensemble(1, rng, lam_range=(1.0, 1.0))[0]
traj = integrate(data, SolverConfig(t_end=30.0, max_samples=601))
cert = certify(traj, data)
print(cert.to_text())

# %%
# H against W. W settles at C0 = sqrt(3 Lambda + 8 pi rho0), while H only
# reaches sqrt(3 Lambda) because the radiation thins out.
H = traj.u + 2 * traj.v
W = traj.diagnostics["W"]
print("C0 =", envelope_constant(data.rho0, data.lam))
for i in range(0, len(traj), 100):
    print(f"t = {traj.times[i]:5.1f}   H = {H[i]:.6f}   W = {W[i]:.6f}")

# %%
# The envelope is the Riccati solution y' = K^2 - alpha^2 y^2. Starting
# from y0 = 0 it is (K/alpha) tanh(alpha K t).
t = np.linspace(0, 3, 7)
print(riccati_closed_form(RiccatiParams(2.0, 1.0, 0.0, 0.0), t) - 2 * np.tanh(2 * t))
