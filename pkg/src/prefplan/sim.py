"""Planning episodes and their metrics.

A single-shot episode plans once over the full horizon from the scenario
starts and treats the plan as executed. A receding-horizon episode replans
from the current states every few steps until both agents reach their
goals or the step budget (four horizons) runs out.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import Configs
from .planners import PLANNERS, PlanResult, PreferenceTrajectory, Trajectory, crossing_step, shift_solution
from .safety import s_pair, wall_distance
from .scenario import Scenario, _waypoints, intent_length, swap_agents

logger = logging.getLogger(__name__)

STRATEGIES = ("ptp", "tsc", "dsc")
PEDESTRIAN_MODELS = ("mirror", "scripted")
GOAL_TOL = 0.05
BUDGET_FACTOR = 4


@dataclass
class MetricsReport:
    """Episode summary. Fields that do not apply are None.

    ``min_speed_robot`` only considers steps taken before the robot first
    comes within ``GOAL_TOL`` of its goal, so resting at the goal does not
    count as stopping.
    """

    robot_cross_step: int | None
    pedestrian_cross_step: int | None
    simultaneity_gap: float | None
    path_ratio_robot: float
    path_ratio_pedestrian: float
    min_pair_distance: float
    min_wall_distance: float
    min_speed_robot: float
    flexibility_min_robot: float | None = None
    flexibility_min_pedestrian: float | None = None
    kl_total: float | None = None

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class EpisodeResult:
    strategy: str
    robot_executed: Trajectory
    pedestrian_executed: Trajectory
    per_replan_plans: list
    metrics: MetricsReport | None = None
    configs: Configs = field(default_factory=Configs)
    mode: str = "single_shot"
    pedestrian_model: str | None = None
    replan_every: int | None = None
    timed_out: bool = False
    robot_pref: PreferenceTrajectory | None = None
    pedestrian_pref: PreferenceTrajectory | None = None

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.per_replan_plans)


def _check_strategy(strategy: str):
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


_N_AGENTS = {"ptp": 1, "tsc": 2, "dsc": 2}


def _plan(strategy, configs: Configs, scenario: Scenario, robot_start=None, pedestrian_start=None,
          previous: PlanResult | None = None, advance: int = 0) -> PlanResult:
    warm = None
    if previous is not None:
        warm = shift_solution(previous.report.solution, _N_AGENTS[strategy], scenario.horizon_steps, advance)
    return PLANNERS[strategy](
        scenario, configs.safety, configs.solver, configs.planner,
        robot_start=robot_start, pedestrian_start=pedestrian_start, warm_start=warm,
    )


def run_single_shot(scenario: Scenario, strategy: str, configs: Configs | None = None) -> EpisodeResult:
    """Plan once from the scenario starts; the plan (and its pedestrian part) is the execution."""
    _check_strategy(strategy)
    configs = dataclasses.replace(configs or Configs(), scenario=scenario)
    plan = _plan(strategy, configs, scenario)
    ep = EpisodeResult(
        strategy, plan.robot_traj, plan.pedestrian_traj, [plan], configs=configs,
        robot_pref=plan.robot_pref, pedestrian_pref=plan.pedestrian_pref,
    )
    ep.metrics = compute_metrics(ep, scenario)
    return ep


def _limit_step(prev, nxt, v_max, dt):
    """Shorten a step that exceeds the speed limit (solver tolerance) onto the limit."""
    d = nxt - prev
    n = float(np.hypot(*d))
    cap = v_max * dt
    return prev + d * (cap / n) if n > cap else nxt


def _point_at(path: np.ndarray, s: float) -> np.ndarray:
    seg = np.diff(path, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    if s >= cum[-1]:
        return path[-1].copy()
    i = int(np.searchsorted(cum, s, side="right") - 1)
    return path[i] + (s - cum[i]) / seg_len[i] * seg[i]


class _ScriptedPedestrian:
    """Follows its intent path, scaling its preferred speed by s_pair to the robot."""

    def __init__(self, scenario: Scenario, configs: Configs):
        self.spec = scenario.pedestrian
        self.path = _waypoints(self.spec, scenario)
        self.s = 0.0
        self.dt = scenario.dt
        self.safety = configs.safety
        self.radius_robot = scenario.robot.radius

    def step(self, robot_pos, ped_pos) -> np.ndarray:
        scale = s_pair(robot_pos, ped_pos, self.safety, self.radius_robot, self.spec.radius)
        self.s += self.spec.v_pref * self.dt * max(scale, 0.0)
        return _point_at(self.path, self.s)


def run_receding_horizon(scenario: Scenario, strategy: str, configs: Configs | None = None,
                         replan_every: int = 1, pedestrian_model: str = "mirror") -> EpisodeResult:
    """Closed-loop episode with replanning from the current states.

    ``mirror``: the pedestrian runs the same planner with the roles swapped.
    ``scripted``: the pedestrian follows its intent, slowed by proximity to
    the robot. Running out of the step budget sets ``timed_out``.
    """
    _check_strategy(strategy)
    if not isinstance(replan_every, (int, np.integer)) or replan_every < 1:
        raise ValueError("replan_every must be a positive integer")
    if pedestrian_model not in PEDESTRIAN_MODELS:
        raise ValueError(f"unknown pedestrian model {pedestrian_model!r}; expected one of {PEDESTRIAN_MODELS}")
    configs = dataclasses.replace(configs or Configs(), scenario=scenario)
    robot, ped = scenario.robot, scenario.pedestrian
    goals = [np.array(robot.goal), np.array(ped.goal)]
    swapped = swap_agents(scenario)
    scripted = _ScriptedPedestrian(scenario, configs) if pedestrian_model == "scripted" else None

    r_hist = [np.array(robot.start)]
    h_hist = [np.array(ped.start)]
    r_prefs: list = []
    h_prefs: list = []
    plans = []
    budget = BUDGET_FACTOR * scenario.horizon_steps
    max_k = scenario.horizon_steps - 1

    def arrived():
        return (np.hypot(*(r_hist[-1] - goals[0])) <= GOAL_TOL
                and np.hypot(*(h_hist[-1] - goals[1])) <= GOAL_TOL)

    own = None
    advance = 0
    while len(r_hist) - 1 < budget and not arrived():
        r0, h0 = r_hist[-1], h_hist[-1]
        # warm start from the previous plans advanced by the steps just executed
        plan = _plan(strategy, configs, scenario, r0, h0, plans[-1] if plans else None, advance)
        plans.append(plan)
        k = min(replan_every, budget - (len(r_hist) - 1), max_k)
        if scripted is None:
            own = _plan(strategy, configs, swapped, h0, r0, own, advance)
            h_next = own.robot_traj.points[1:k + 1]
            if own.robot_pref is not None:
                h_prefs.extend(own.robot_pref.steps[1:k + 1])
        else:
            h_next = None
        if plan.robot_pref is not None:
            r_prefs.extend(plan.robot_pref.steps[1:k + 1])
        for j in range(k):
            r_new = _limit_step(r_hist[-1], plan.robot_traj.points[j + 1], robot.v_max, scenario.dt)
            if scripted is None:
                h_new = _limit_step(h_hist[-1], h_next[j], ped.v_max, scenario.dt)
            else:
                h_new = scripted.step(r_hist[-1], h_hist[-1])
            r_hist.append(r_new)
            h_hist.append(h_new)
        advance = k
        logger.debug("step %d: robot %s pedestrian %s", len(r_hist) - 1, r_hist[-1], h_hist[-1])

    ep = EpisodeResult(
        strategy,
        Trajectory(np.array(r_hist), scenario.dt),
        Trajectory(np.array(h_hist), scenario.dt),
        plans,
        configs=configs,
        mode="receding_horizon",
        pedestrian_model=pedestrian_model,
        replan_every=int(replan_every),
        timed_out=not arrived(),
        robot_pref=PreferenceTrajectory(r_prefs, scenario.dt) if r_prefs else None,
        pedestrian_pref=PreferenceTrajectory(h_prefs, scenario.dt) if h_prefs else None,
    )
    ep.metrics = compute_metrics(ep, scenario)
    return ep


def _moving_speeds(traj: Trajectory, goal) -> np.ndarray:
    dist = np.hypot(*(traj.points - np.asarray(goal)).T)
    at_goal = np.nonzero(dist <= GOAL_TOL)[0]
    end = int(at_goal[0]) if at_goal.size else len(traj)
    return traj.speeds()[:max(end, 1)]


def compute_metrics(episode: EpisodeResult, scenario: Scenario) -> MetricsReport:
    r, h = episode.robot_executed, episode.pedestrian_executed
    rc = crossing_step(r.points, scenario.wall_y)
    hc = crossing_step(h.points, scenario.wall_y)
    gap = None if rc is None or hc is None else abs(rc - hc) * scenario.dt
    n = min(len(r), len(h))
    pair = np.hypot(*(r.points[:n] - h.points[:n]).T)
    walls = [wall_distance(p, scenario) for p in np.vstack([r.points, h.points])]
    speeds = _moving_speeds(r, scenario.robot.goal)

    flex_r = flex_h = kl = None
    if episode.robot_pref is not None:
        flex_r = float(np.min(episode.robot_pref.flexibility()))
    if episode.pedestrian_pref is not None:
        flex_h = float(np.min(episode.pedestrian_pref.flexibility()))
    kls = [p.kl_cost_robot + p.kl_cost_pedestrian for p in episode.per_replan_plans if p.kl_cost_robot is not None]
    if kls:
        kl = float(np.sum(kls))

    return MetricsReport(
        robot_cross_step=rc,
        pedestrian_cross_step=hc,
        simultaneity_gap=gap,
        path_ratio_robot=r.length() / intent_length(scenario.robot, scenario),
        path_ratio_pedestrian=h.length() / intent_length(scenario.pedestrian, scenario),
        min_pair_distance=float(np.min(pair)),
        min_wall_distance=float(np.min(walls)),
        min_speed_robot=float(np.min(speeds)) if speeds.size else 0.0,
        flexibility_min_robot=flex_r,
        flexibility_min_pedestrian=flex_h,
        kl_total=kl,
    )
