"""
Augmented Lagrangian solver
===========================

Every planner is a smooth nonlinear program with inequality constraints
``g(z) >= 0``. The solver is an augmented Lagrangian method with an L-BFGS
inner loop, and gradients default to central finite differences.
"""

import numpy as np

from prefplan.optimize import NlpProblem, SolverConfig, check_gradient, gradient_fd, solve

# %%
# Minimize x + y on the unit disc. The optimum is (-1/sqrt 2, -1/sqrt 2).
disc = NlpProblem(lambda z: float(z[0] + z[1]), np.array([1.5, 1.5]), lambda z: 1.0 - z @ z)
report = solve(disc, SolverConfig())
print("solution", report.solution, "converged", report.converged)
print("multiplier", report.multipliers, "max violation", report.max_violation)
print("violation history", np.round(report.violation_history, 6))

# %%
# Analytic gradients are checked against central differences.
f = lambda z: float(np.exp(z[0]) * np.sin(z[1]))  # noqa: E731
grad = lambda z: np.array([np.exp(z[0]) * np.sin(z[1]), np.exp(z[0]) * np.cos(z[1])])  # noqa: E731
z = np.array([0.3, 0.7])
print("finite differences", gradient_fd(f, z))
print("relative gradient error", check_gradient(f, grad, z))
