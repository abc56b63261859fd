"""
The bottleneck door and its safety functions
============================================

A wall with a single door splits a room in two. The robot and the
pedestrian start on opposite sides and each has an intent: a straight run
through the door center sampled at its preferred speed.
"""

import numpy as np

from prefplan.config import canonical_configs
from prefplan.gaussian import Gaussian2
from prefplan.safety import expected_door_safety, s_door, s_pair, wall_distance
from prefplan.scenario import intent, intent_length

configs = canonical_configs()
sc, safety = configs.scenario, configs.safety
print(f"room {sc.room_width} x {sc.room_height} m, door {sc.door_width} m wide at y={sc.wall_y}")

# %%
# Intents are polylines through the door center, one point per time step.
robot_intent = intent(sc.robot, sc)
print("robot intent: ", len(robot_intent), "steps,", round(intent_length(sc.robot, sc), 3), "m")
print("first steps:\n", robot_intent[:4])

# %%
# Safety saturates towards 1 far from walls and other agents. The door
# center is the least safe free point on the wall line.
for p in ([5.0, 5.0], [5.0, 3.0], [2.0, 2.0]):
    print(f"point {p}: wall distance {wall_distance(p, sc):.3f}, s_door {s_door(p, sc, safety, 0.3):.3f}")
print("s_pair at 1 m:", s_pair([4.0, 5.0], [5.0, 5.0], safety))

# %%
# Distributional planning constrains the expectation of the door safety
# under a preference Gaussian. Wider distributions pay for their spread.
for sigma in (0.05, 0.2, 0.4):
    g = Gaussian2([5.0, 5.0], sigma ** 2 * np.eye(2))
    print(f"sigma {sigma}: E[s_door] = {expected_door_safety(g, sc, safety, 0.3):.4f}")
