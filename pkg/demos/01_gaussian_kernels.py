"""
Gaussian kernels: divergence, overlap and quadrature
====================================================

Preference distributions are 2D Gaussians. The planners compare them with
closed-form KL divergences and overlap integrals, and take expectations of
nonlinear safety functions with Gauss-Hermite quadrature.
"""

import numpy as np

from prefplan.gaussian import Gaussian2, expect, kl_divergence, overlap
from prefplan.selfcheck import kl_quadrature, overlap_monte_carlo

# %%
# Two preference steps: a robot slightly left of the door and a pedestrian
# slightly right of it, the robot stretched along its direction of travel.
robot = Gaussian2([4.8, 5.0], [[0.09, 0.0], [0.0, 0.16]])
pedestrian = Gaussian2([5.3, 5.1], 0.09 * np.eye(2))

print("KL(robot || pedestrian)  closed form:", kl_divergence(robot, pedestrian))
print("                         quadrature :", kl_quadrature(robot, pedestrian))

# %%
# The overlap integral is the density of the difference of the two positions
# evaluated at zero, which makes it a smooth collision surrogate.
rng = np.random.default_rng(42)
print("overlap closed form :", overlap(robot, pedestrian))
print("overlap Monte Carlo :", overlap_monte_carlo(robot, pedestrian, rng))

# %%
# Any expectation under a Gaussian can be taken on a tensor Gauss-Hermite
# grid. The second moment of the x coordinate is mean^2 + variance.
second = expect(robot, lambda x: x[0] ** 2)
print("E[x^2] =", second, "expected", 4.8 ** 2 + 0.09)
