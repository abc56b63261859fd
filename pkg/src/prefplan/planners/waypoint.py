"""Trajectory-space planners: prediction-then-planning and coupled waypoints."""

from __future__ import annotations

import dataclasses

import numpy as np

from ..gaussian import LOG_2PI
from ..optimize import NlpProblem, SolverConfig, solve
from ..safety import SafetyConfig, door_margin, door_safety_batch, pair_clearance_margin, pair_margin, s_door, s_pair
from ..scenario import AgentSpec, Scenario, frame_origin, intent, swap_agents
from .common import (
    KINEMATIC_BACKOFF,
    JacobianBuilder,
    Layout,
    PlanResult,
    PlannerConfig,
    Trajectory,
    agents_swapped,
    kinematic_block,
)


class _Cached:
    """Evaluate objective, gradient, constraints and Jacobian together, once per point."""

    def __init__(self, fn):
        self.fn = fn
        self.z = None
        self.out = None

    def __call__(self, z):
        if self.z is None or not np.array_equal(z, self.z):
            self.z = np.array(z, copy=True)
            # far-off line-search trials may overflow; the solver rejects non-finite values
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                self.out = self.fn(self.z)
        return self.out

    def problem(self, x0) -> NlpProblem:
        return NlpProblem(
            objective=lambda z: self(z)[0],
            initial_point=x0,
            inequality_constraints=lambda z: self(z)[2],
            gradient=lambda z: self(z)[1],
            jacobian=lambda z: self(z)[3],
        )


def neg_log_prior(x, means, sigma):
    """Sum over steps of -log N(x_t; mean_t, sigma^2 I) and its gradient w.r.t. x."""
    diff = x - means
    val = np.sum(0.5 * np.einsum("ni,ni->n", diff, diff) / sigma ** 2 + LOG_2PI + 2.0 * np.log(sigma))
    return val, diff / sigma ** 2


def add_kinematics(jb: JacobianBuilder, x, idx, spec: AgentSpec, dt: float, scale: float):
    val, d_next = kinematic_block(x, spec.v_max * (1.0 - KINEMATIC_BACKOFF), dt)
    jb.add(val, [(idx[1:], d_next * scale), (idx[:-1], -d_next * scale)])


def add_anchor(jb: JacobianBuilder, values, idx, scale: float = 1.0):
    """Two-sided rows pinning ``values`` (compared to their targets) at zero."""
    values = np.asarray(values, dtype=float).ravel()
    idx = np.asarray(idx).ravel()
    ones = np.full(values.size, scale)
    jb.add(values, [(idx, ones)])
    jb.add(-values, [(idx, -ones)])


def predict_pedestrian_open_loop(scenario: Scenario, start=None) -> Trajectory:
    """Most likely pedestrian trajectory under its prior alone: its intent."""
    return Trajectory(intent(scenario.pedestrian, scenario, start=start), scenario.dt)


def _ptp_eval(scenario, safety, robot_means, ped_pred, start, layout, scale):
    spec = scenario.robot
    radii = spec.radius + scenario.pedestrian.radius
    idx = layout.mu[0]

    def fn(z):
        x = z[idx] * scale
        obj, d_obj = neg_log_prior(x, robot_means, spec.prior_sigma)
        grad = np.zeros(layout.dim)
        grad[idx] = d_obj * scale
        jb = JacobianBuilder(layout.dim)
        # step 0 is the current state: fixed, so it carries no safety rows
        vd, gd = door_margin(x[1:], scenario, safety, spec.radius, centered=True)
        vp, gp = pair_margin(x[1:], ped_pred[1:], safety, radii)
        jb.add(vd + vp - safety.gamma, [(idx[1:], (gd + gp) * scale)])
        add_kinematics(jb, x, idx, spec, scenario.dt, scale)
        add_anchor(jb, x[0] - start, idx[0], scale)
        g, jac = jb.result()
        return obj, grad, g, jac

    return fn


def ptp_margins(scenario, safety, robot, ped, start=None) -> dict:
    """Independent re-evaluation of the prediction-then-planning constraints (safety from step 1)."""
    radii_r, radii_h = scenario.robot.radius, scenario.pedestrian.radius
    safety_margin = min(
        s_door(p, scenario, safety, radii_r) + s_pair(p, q, safety, radii_r, radii_h) - safety.gamma
        for p, q in zip(robot.points[1:], ped.points[1:])
    )
    return {
        "safety": float(safety_margin),
        "kinematic_robot": float(np.min(scenario.robot.v_max * scenario.dt - robot.step_lengths())),
        "anchor_robot": -float(np.max(np.abs(robot.points[0] - (scenario.robot.start if start is None else start)))),
    }


def yield_initialization(scenario: Scenario, safety: SafetyConfig, means: np.ndarray, ped: np.ndarray,
                         centered: bool = False) -> np.ndarray:
    """Robot intent retimed by the shortest hold at the start that clears the prediction.

    Starting inside the predicted pedestrian (as the raw intent does when
    both intents reach the door together) leaves a local optimizer pulled
    forward and backward at consecutive steps. Holding the robot for ``d``
    steps, with ``d`` the smallest value whose retimed intent satisfies the
    safety constraint, removes that ambiguity. ``d = 0`` reproduces the
    intent whenever the intent itself is safe. Positions are door-centered
    when ``centered`` is set.
    """
    r, h = scenario.robot.radius, scenario.pedestrian.radius
    n = len(means)
    for d in range(n):
        cand = means[np.maximum(np.arange(n) - d, 0)]
        door, _ = door_safety_batch(cand[1:], scenario, safety, r, centered)
        pair = np.array([s_pair(p, q, safety, r, h) for p, q in zip(cand[1:], ped[1:])])
        if np.all(door + pair >= safety.gamma):
            return cand
    return means


def _ptp_setup(scenario, safety, planner, robot_start=None, pedestrian_start=None):
    start = np.array(robot_start if robot_start is not None else scenario.robot.start, dtype=float)
    # the solver works in door-centered coordinates, where reflection is an exact sign flip
    origin = frame_origin(scenario)
    ped_c = intent(scenario.pedestrian, scenario, start=pedestrian_start, centered=True)
    means = intent(scenario.robot, scenario, start=start, centered=True)
    scale = max(scenario.room_width, scenario.room_height)
    layout = Layout(scenario.horizon_steps, 1, with_cov=False)
    cached = _Cached(_ptp_eval(scenario, safety, means, ped_c, start - origin, layout, scale))
    x0 = yield_initialization(scenario, safety, means, ped_c, centered=True).ravel() / scale
    return cached.problem(x0), start, origin, scale


def ptp_problem(scenario: Scenario, safety: SafetyConfig | None = None, planner: PlannerConfig | None = None,
                robot_start=None, pedestrian_start=None) -> NlpProblem:
    """The prediction-then-planning program with analytic gradient and Jacobian.

    Decision variables are the robot waypoints in door-centered coordinates
    divided by the room size.
    """
    return _ptp_setup(scenario, safety or SafetyConfig(), planner or PlannerConfig(),
                      robot_start, pedestrian_start)[0]


def plan_ptp(scenario: Scenario, safety: SafetyConfig | None = None, solver: SolverConfig | None = None,
             planner: PlannerConfig | None = None, robot_start=None, pedestrian_start=None,
             warm_start=None) -> PlanResult:
    """Predict the pedestrian as its intent, then plan the robot around that prediction.

    ``robot_start``/``pedestrian_start`` override the scenario starts when
    replanning from current states; ``warm_start`` is an initial decision
    vector (see :func:`shift_solution`).
    """
    safety = safety or SafetyConfig()
    solver = solver or SolverConfig()
    planner = planner or PlannerConfig()
    solver = dataclasses.replace(solver, penalty_init=max(solver.penalty_init, planner.ptp_penalty_init))
    problem, start, origin, scale = _ptp_setup(scenario, safety, planner, robot_start, pedestrian_start)
    if warm_start is not None:
        problem.initial_point = np.asarray(warm_start, dtype=float).ravel()
    report = solve(problem, solver)
    robot = Trajectory(report.solution.reshape(-1, 2) * scale + origin, scenario.dt)
    ped = predict_pedestrian_open_loop(scenario, start=pedestrian_start)
    return PlanResult("ptp", robot, ped, report, margins=ptp_margins(scenario, safety, robot, ped, start))


def _tsc_eval(scenario, safety, planner, means, starts, layout, scale):
    specs = [scenario.robot, scenario.pedestrian]
    radii = specs[0].radius + specs[1].radius

    def fn(z):
        xs = [z[layout.mu[a]] * scale for a in range(2)]
        obj = 0.0
        grad = np.zeros(layout.dim)
        jb = JacobianBuilder(layout.dim)
        for a in range(2):
            v, d = neg_log_prior(xs[a], means[a], specs[a].prior_sigma)
            vd, gd = door_margin(xs[a], scenario, safety, specs[a].radius, centered=True)
            obj += v - planner.w_door * np.sum(vd)
            grad[layout.mu[a]] = (d - planner.w_door * gd) * scale
        # s_pair >= gamma_pair, imposed in the equivalent clearance form
        vp, gp = pair_clearance_margin(xs[0][1:], xs[1][1:], safety, radii, planner.gamma_pair)
        jb.add(vp, [(layout.mu[0][1:], gp * scale), (layout.mu[1][1:], -gp * scale)])
        for a in range(2):
            add_kinematics(jb, xs[a], layout.mu[a], specs[a], scenario.dt, scale)
            add_anchor(jb, xs[a][0] - starts[a], layout.mu[a][0], scale)
        g, jac = jb.result()
        return obj, grad, g, jac

    return fn


def tsc_margins(scenario, safety, planner, robot, ped, starts=None) -> dict:
    """Independent re-evaluation of the coupled-trajectory constraints (pair safety from step 1)."""
    r, h = scenario.robot, scenario.pedestrian
    starts = starts if starts is not None else [r.start, h.start]
    pair = min(s_pair(p, q, safety, r.radius, h.radius) for p, q in zip(robot.points[1:], ped.points[1:]))
    return {
        "pair": float(pair - planner.gamma_pair),
        "kinematic_robot": float(np.min(r.v_max * scenario.dt - robot.step_lengths())),
        "kinematic_pedestrian": float(np.min(h.v_max * scenario.dt - ped.step_lengths())),
        "anchor_robot": -float(np.max(np.abs(robot.points[0] - starts[0]))),
        "anchor_pedestrian": -float(np.max(np.abs(ped.points[0] - starts[1]))),
    }


def _tsc_setup(scenario, safety, planner, robot_start=None, pedestrian_start=None):
    starts = [
        np.array(robot_start if robot_start is not None else scenario.robot.start, dtype=float),
        np.array(pedestrian_start if pedestrian_start is not None else scenario.pedestrian.start, dtype=float),
    ]
    order = [1, 0] if agents_swapped(scenario) else [0, 1]
    ordered = swap_agents(scenario) if order[0] else scenario
    origin = frame_origin(scenario)
    specs = (ordered.robot, ordered.pedestrian)
    means = [intent(a, scenario, start=starts[i], centered=True) for a, i in zip(specs, order)]
    scale = max(scenario.room_width, scenario.room_height)
    layout = Layout(scenario.horizon_steps, 2, with_cov=False)
    fn = _tsc_eval(ordered, safety, planner, means, [starts[i] - origin for i in order], layout, scale)
    x0 = np.concatenate([m.ravel() for m in means]) / scale
    # blocks of the robot and the pedestrian in the decision vector
    blocks = [layout.mu[order.index(0)], layout.mu[order.index(1)]]
    return _Cached(fn).problem(x0), starts, origin, scale, blocks


def tsc_problem(scenario: Scenario, safety: SafetyConfig | None = None, planner: PlannerConfig | None = None,
                robot_start=None, pedestrian_start=None) -> NlpProblem:
    """The coupled-waypoint program over both agents' waypoints, initialized at both intents.

    The two agents' blocks follow :func:`agents_swapped`.
    """
    return _tsc_setup(scenario, safety or SafetyConfig(), planner or PlannerConfig(),
                      robot_start, pedestrian_start)[0]


def plan_tsc(scenario: Scenario, safety: SafetyConfig | None = None, solver: SolverConfig | None = None,
             planner: PlannerConfig | None = None, robot_start=None, pedestrian_start=None,
             warm_start=None) -> PlanResult:
    """Jointly optimize both agents' waypoints under their fixed prior preferences."""
    safety = safety or SafetyConfig()
    solver = solver or SolverConfig()
    planner = planner or PlannerConfig()
    problem, starts, origin, scale, blocks = _tsc_setup(scenario, safety, planner, robot_start, pedestrian_start)
    if warm_start is not None:
        problem.initial_point = np.asarray(warm_start, dtype=float).ravel()
    report = solve(problem, solver)
    robot = Trajectory(report.solution[blocks[0]] * scale + origin, scenario.dt)
    ped = Trajectory(report.solution[blocks[1]] * scale + origin, scenario.dt)
    margins = tsc_margins(scenario, safety, planner, robot, ped, starts)
    return PlanResult("tsc", robot, ped, report, margins=margins)
