"""
Parameter sweeps and artifact files
===================================

Episodes are stored as JSON documents that read back bit for bit, metrics
as CSV tables and figures as SVG. The command line wraps the same calls.
"""

from pathlib import Path

from prefplan.artifacts_io import read_episode, read_metrics_table
from prefplan.cli import main

out = Path("out/demos/sweep")

# %%
# Sweep the door width for the coupled trajectory planner.
main(["sweep", "--param", "door_width_m", "--values", "1.2,1.6,2.4", "--strategy", "tsc", "--out", str(out)])
for row in read_metrics_table(out / "sweep_door_width_m_tsc.csv"):
    print(row["value"], row["simultaneity_gap"], row["path_ratio_robot"], row["min_pair_distance"])

# %%
# Plan once and read the episode back.
main(["plan", "--strategy", "ptp", "--out", str(out)])
ep = read_episode(out / "ptp_episode.json")
print(ep.strategy, ep.mode, ep.per_replan_plans[0].report.converged, ep.metrics.path_ratio_robot)
