from .common import DscPlanResult, PlannerConfig, PlanResult, PreferenceTrajectory, Trajectory, crossing_step, shift_solution
from .distribution import dsc_margins, dsc_problem, kl_cost, plan_dsc
from .waypoint import (
    plan_ptp,
    plan_tsc,
    predict_pedestrian_open_loop,
    ptp_margins,
    ptp_problem,
    tsc_margins,
    tsc_problem,
)

PLANNERS = {"ptp": plan_ptp, "tsc": plan_tsc, "dsc": plan_dsc}
PROBLEMS = {"ptp": ptp_problem, "tsc": tsc_problem, "dsc": dsc_problem}

__all__ = [
    "DscPlanResult",
    "PLANNERS",
    "PROBLEMS",
    "PlanResult",
    "PlannerConfig",
    "PreferenceTrajectory",
    "Trajectory",
    "crossing_step",
    "dsc_margins",
    "dsc_problem",
    "kl_cost",
    "plan_dsc",
    "plan_ptp",
    "plan_tsc",
    "predict_pedestrian_open_loop",
    "ptp_margins",
    "ptp_problem",
    "shift_solution",
    "tsc_margins",
    "tsc_problem",
]
