"""
Flexibility where the space is tight
====================================

Flexibility is the trace of an agent's preference covariance. In the
distribution-space plan both agents become less flexible as they approach
the door and relax again once through it.
"""

import numpy as np

from prefplan.config import canonical_configs
from prefplan.sim import run_single_shot

configs = canonical_configs()
sc = configs.scenario
ep = run_single_shot(sc, "dsc", configs)

prior = 2 * sc.robot.prior_sigma ** 2
for name, pref, cross in (("robot", ep.robot_pref, ep.metrics.robot_cross_step),
                          ("pedestrian", ep.pedestrian_pref, ep.metrics.pedestrian_cross_step)):
    trace = pref.flexibility()
    print(f"{name}: crosses the door at step {cross}, least flexible at step {int(np.argmin(trace))}")
    print("  trace / prior trace:", np.round(trace / prior, 2))

print("total KL from the priors:", round(ep.metrics.kl_total, 4))
