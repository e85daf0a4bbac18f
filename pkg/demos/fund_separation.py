"""Walk through the analytic portfolio solver.

The quadratic growth approximation max w'mu - (gamma/2) w'Sigma w with a
full-investment budget splits into two funds: a minimum-risk benchmark
that ignores views entirely, and a self-funding overlay that prices them.
This script solves a small example both analytically and numerically,
verifies they agree, and shows how the two portfolio modes are built.

Run:  python3 demos/fund_separation.py
"""

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import minimize

from zeroport import fundsep

rng = np.random.default_rng(7)

# A three-asset market: one cheap diversifier, two correlated risky names.
mu = np.array([0.002, 0.011, -0.004])
sigma = np.array([
    [0.0004, 0.0001, 0.0000],
    [0.0001, 0.0009, 0.0004],
    [0.0000, 0.0004, 0.0016],
])
gamma = 2.0

w_bench = fundsep.benchmark_weights(sigma)
w_active = fundsep.active_weights(mu, sigma, gamma=gamma)
w_star = fundsep.mean_variance_weights(mu, sigma, gamma=gamma)

print("benchmark fund (no views):   ", np.round(w_bench, 4), " sum:", w_bench.sum())
print("active fund (views, sum 0):  ", np.round(w_active, 4), " sum:", f"{w_active.sum():.1e}")
print("combined optimum:            ", np.round(w_star, 4))

# Numeric cross-check: eliminate the budget constraint with a null-space
# basis and let BFGS find the unconstrained quadratic optimum.
z = null_space(np.ones((1, 3)))
w0 = np.full(3, 1 / 3)
res = minimize(lambda v: -((w0 + z @ v) @ mu - 0.5 * gamma * (w0 + z @ v) @ sigma @ (w0 + z @ v)),
               np.zeros(2), method="BFGS", options={"gtol": 1e-13})
w_numeric = w0 + z @ res.x
print("numeric optimum:             ", np.round(w_numeric, 4),
      " max gap:", f"{np.max(np.abs(w_numeric - w_star)):.2e}")

lam = fundsep.lagrange_multiplier(mu, sigma, gamma=gamma)
residual = gamma * sigma @ w_star - (mu - lam)
print("stationarity residual:       ", f"{np.max(np.abs(residual)):.2e}",
      f" (lambda = {lam:.6f})")

# Agent controls: what a matching agent would actually hold.
print()
print("absolute controls (simplex): ", np.round(fundsep.agent_controls(mu, sigma, "absolute"), 4))
print("active controls (unit L1):   ", np.round(fundsep.agent_controls(mu, sigma, "active"), 4))

# Degenerate inputs are survivable: a single-sample covariance is all
# zeros, and the ridge turns it into an eps-scaled identity.
flat = fundsep.agent_controls(np.array([0.01, 0.01, 0.01]), np.zeros((3, 3)), "active")
print("flat view, zero covariance:  ", flat, "(agent holds cash)")
