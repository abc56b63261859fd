"""Types and constraint blocks shared by the three planners."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gaussian import Gaussian2
from ..optimize import SolveReport

KINEMATIC_TOL = 1e-6
# Speed limits are imposed this fraction below v_max, so a solution accepted
# with constraint violation up to 1e-4 still respects v_max exactly.
KINEMATIC_BACKOFF = 1e-4


@dataclass(frozen=True)
class PlannerConfig:
    """Planner-specific knobs not covered by the safety configuration.

    ``sigma_max_factor`` scales the prior variance to give the largest
    allowed covariance trace for the distribution planner.
    ``ptp_penalty_init`` is a lower bound on the initial penalty used by
    prediction-then-planning: with a soft start the robot can slide through
    the predicted pedestrian between consecutive steps and settle in an
    infeasible local minimum.
    ``w_door`` weighs the door-safety reward in the coupled-waypoint
    objective. Each waypoint moves off its prior mean by about
    ``w_door * prior_sigma**2 * |grad s_door|``, so the weight is kept small
    enough that an unobstructed plan stays within 1e-3 m of the intent.
    """

    w_door: float = 0.02
    gamma_pair: float = 0.35
    sigma_min: float = 0.15
    sigma_max_factor: float = 3.0
    n_nodes: int = 7
    ptp_penalty_init: float = 1e4

    def __post_init__(self):
        if self.sigma_min <= 0 or self.sigma_max_factor <= 1:
            raise ValueError("need sigma_min > 0 and sigma_max_factor > 1")
        if not 0 < self.gamma_pair < 1:
            raise ValueError("gamma_pair must lie in (0, 1)")
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")
        if self.w_door < 0 or self.ptp_penalty_init <= 0:
            raise ValueError("need w_door >= 0 and ptp_penalty_init > 0")


@dataclass
class Trajectory:
    points: np.ndarray
    dt: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)

    def __len__(self):
        return len(self.points)

    def step_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.points, axis=0).T)

    def speeds(self) -> np.ndarray:
        return self.step_lengths() / self.dt

    def length(self) -> float:
        return float(np.sum(self.step_lengths()))

    def is_feasible(self, v_max: float, tol: float = KINEMATIC_TOL) -> bool:
        return bool(np.all(self.step_lengths() <= v_max * self.dt + tol))


@dataclass
class PreferenceTrajectory:
    steps: list
    dt: float

    def __len__(self):
        return len(self.steps)

    def means(self) -> np.ndarray:
        return np.array([g.mean for g in self.steps])

    def covs(self) -> np.ndarray:
        return np.array([g.cov for g in self.steps])

    def flexibility(self) -> np.ndarray:
        return np.array([g.flexibility() for g in self.steps])

    @classmethod
    def from_arrays(cls, means, covs, dt) -> "PreferenceTrajectory":
        return cls([Gaussian2(m, c) for m, c in zip(means, covs)], dt)


@dataclass
class PlanResult:
    """Planned robot trajectory plus the pedestrian prediction it assumes.

    ``robot_pref``/``pedestrian_pref`` and the KL costs are only populated by
    the distribution-space planner.
    """

    strategy: str
    robot_traj: Trajectory
    pedestrian_traj: Trajectory
    report: SolveReport
    robot_pref: PreferenceTrajectory | None = None
    pedestrian_pref: PreferenceTrajectory | None = None
    kl_cost_robot: float | None = None
    kl_cost_pedestrian: float | None = None
    margins: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.report.converged


# DscPlanResult is a PlanResult with the distributional fields filled in.
DscPlanResult = PlanResult


class Layout:
    """Index bookkeeping for a flat decision vector of per-agent blocks."""

    def __init__(self, horizon: int, n_agents: int, with_cov: bool):
        self.horizon = horizon
        self.n_agents = n_agents
        self.with_cov = with_cov
        width = 5 if with_cov else 2
        self.dim = n_agents * horizon * width
        base = np.arange(self.dim).reshape(n_agents, horizon, width)
        self.mu = [base[a, :, :2] for a in range(n_agents)]
        self.cov = [base[a, :, 2:] for a in range(n_agents)] if with_cov else None


def agents_swapped(scenario) -> bool:
    """Whether joint programs put the pedestrian's block first.

    Blocks are ordered by a role-independent key of the agent specs, so a
    scenario and its role-swapped copy run identical floating-point work and
    their solutions are exact swaps of each other.
    """
    cx = scenario.door_center_x

    def key(a):
        return (a.start[1], a.goal[1], abs(a.start[0] - cx), abs(a.goal[0] - cx),
                a.radius, a.v_pref, a.v_max, a.prior_sigma, a.start[0], a.goal[0])

    return key(scenario.pedestrian) < key(scenario.robot)


def shift_solution(z: np.ndarray, n_agents: int, horizon: int, k: int) -> np.ndarray:
    """Advance a flat decision vector by ``k`` steps, repeating each agent's last step.

    Used to warm-start a replan after executing ``k`` steps of a plan.
    """
    blocks = np.asarray(z, dtype=float).reshape(n_agents, horizon, -1)
    idx = np.minimum(np.arange(horizon) + k, horizon - 1)
    return blocks[:, idx].ravel()


def kinematic_block(x: np.ndarray, v_max: float, dt: float):
    """Rows ``1 - |x_{t+1} - x_t|^2 / (v_max dt)^2 >= 0`` and their gradients.

    Returns ``(values, d_next)``: the gradient w.r.t. ``x_{t+1}`` is
    ``d_next`` and w.r.t. ``x_t`` is ``-d_next``.
    """
    c2 = (v_max * dt) ** 2
    diff = np.diff(x, axis=0)
    val = 1.0 - np.einsum("ni,ni->n", diff, diff) / c2
    return val, -2.0 * diff / c2


class JacobianBuilder:
    """Accumulates constraint rows and their sparse gradients into dense arrays."""

    def __init__(self, dim: int):
        self.dim = dim
        self.values: list = []
        self.rows: list = []
        self.cols: list = []
        self.data: list = []
        self.count = 0

    def add(self, values, entries):
        """``entries`` is a list of (col_index_array (n, k), grad_array (n, k))."""
        values = np.atleast_1d(values)
        n = values.size
        r = np.arange(self.count, self.count + n)
        for cols, grads in entries:
            cols = np.asarray(cols).reshape(n, -1)
            grads = np.asarray(grads, dtype=float).reshape(n, -1)
            self.rows.append(np.repeat(r, cols.shape[1]))
            self.cols.append(cols.ravel())
            self.data.append(grads.ravel())
        self.values.append(values)
        self.count += n

    def result(self):
        g = np.concatenate(self.values)
        jac = np.zeros((self.count, self.dim))
        if self.rows:
            np.add.at(jac, (np.concatenate(self.rows), np.concatenate(self.cols)), np.concatenate(self.data))
        return g, jac


def crossing_step(points: np.ndarray, wall_y: float) -> int | None:
    """First step index whose position is on or past the wall line, or None."""
    side0 = np.sign(points[0, 1] - wall_y)
    if side0 == 0:
        return 0
    rel = (points[:, 1] - wall_y) * side0
    idx = np.nonzero(rel <= 0)[0]
    return int(idx[0]) if idx.size else None
