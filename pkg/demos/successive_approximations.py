"""
Successive approximations
=========================

The existence argument builds the solution as the limit of iterates
S_{n+1} = S_0 + int F(S_n). On a short interval the differences between
consecutive iterates shrink like C^n T^n / n!, which is easy to watch.
"""
import math

from bianchi import InitialData, ReducedState, pick_horizon, run_scheme

data = InitialData.from_reduced(ReducedState(1.0, 1.0, 3.0 / (8.0 * math.pi), 0.0, 0.0), lam=0.0)

# %%
# Fixed interval [0, 0.1]; beta_n next to the factorial bound.
grid, report = run_scheme(data, T=0.1, grid_points=512, check_refinement=True)
print(f"fitted C = {report.fitted_C2:.3f}, converged = {report.converged}")
for n, beta, bound in zip(report.orders, report.betas, report.bounds):
    print(f"n = {n:2d}   beta_n = {beta:.3e}   bound = {bound:.3e}")
print("bound holds:", report.factorial_bound_ok, " grid-independent:", report.refinement_ok)

# %%
# Exact radiation solution for comparison.
exact = 1.0 / (1.0 + 2.0 * grid.times)
print("sup |u_n - u| =", abs(grid.values[-1][0] - exact).max())

# %%
# Without a prescribed interval the horizon keeps every iterate within
# unit distance of the initial value.
print("automatic horizon:", pick_horizon(data))
