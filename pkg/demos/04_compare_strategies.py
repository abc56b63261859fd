"""
Three ways to plan through a door
=================================

Prediction-then-planning fixes the pedestrian on its intent and plans the
robot around it. Trajectory-space coupling plans both agents jointly but
keeps their preferences static. Distribution-space coupling optimizes both
agents' preference distributions, letting each one narrow where space is
tight.
"""

from pathlib import Path

from prefplan.artifacts_io import render_episode, write_episode, write_metrics_table
from prefplan.config import canonical_configs
from prefplan.sim import STRATEGIES, run_single_shot

configs = canonical_configs()
out = Path("out/demos/compare")
out.mkdir(parents=True, exist_ok=True)

episodes = []
for strategy in STRATEGIES:
    ep = run_single_shot(configs.scenario, strategy, configs)
    m = ep.metrics
    print(f"{strategy}: crossings {m.robot_cross_step}/{m.pedestrian_cross_step}, "
          f"gap {m.simultaneity_gap} s, path ratio {m.path_ratio_robot:.3f}, "
          f"min pair distance {m.min_pair_distance:.3f} m")
    write_episode(ep, out / f"{strategy}_episode.json")
    render_episode(ep, configs.scenario, out / f"{strategy}.svg")
    episodes.append(ep)

# %%
# The robot under prediction-then-planning dodges and waits for a pedestrian
# that never reacts. Under trajectory coupling the pedestrian rushes through
# the door at its speed limit. Distribution coupling lets both cross
# together at close to their preferred pace.
write_metrics_table(episodes, out / "metrics.csv")
print("figures and tables in", out)
