"""
Closed-loop episodes
====================

In a receding-horizon episode each agent replans from the current states
every few steps. The pedestrian either mirrors the robot's planner with the
roles swapped or follows a script, slowing down near the robot.
"""

from prefplan.config import canonical_configs
from prefplan.sim import run_receding_horizon

configs = canonical_configs()
sc = configs.scenario

# %%
# A scripted pedestrian that keeps its intent makes the prediction-based
# robot hesitate: it slows almost to a stop and takes a long detour.
ep = run_receding_horizon(sc, "ptp", configs, replan_every=2, pedestrian_model="scripted")
m = ep.metrics
print(f"ptp vs scripted: {len(ep.robot_executed) - 1} steps, min speed {m.min_speed_robot:.3f} m/s, "
      f"path ratio {m.path_ratio_robot:.3f}, timed out {ep.timed_out}")

# %%
# Two coupled planners negotiating with each other cross the door together.
ep = run_receding_horizon(sc, "tsc", configs, replan_every=2, pedestrian_model="mirror")
m = ep.metrics
print(f"tsc vs mirror: {len(ep.robot_executed) - 1} steps, crossings {m.robot_cross_step}/"
      f"{m.pedestrian_cross_step}, min pair distance {m.min_pair_distance:.3f} m")

# %%
# The distribution-space version takes about two minutes on one core:
#
#     prefplan simulate --strategy dsc --pedestrian mirror --replan-every 2 --out out
