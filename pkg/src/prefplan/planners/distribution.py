"""Distribution-space coupling over per-step Gaussian preferences.

Both agents' preferences (means and covariances at every step) are the
decision variables. The cost is the summed KL divergence of each
preference from its prior; safety is imposed per step through the
expected wall safety of each agent and the overlap of the two densities.
"""

from __future__ import annotations

import numpy as np

from ..gaussian import (
    Gaussian2,
    batch_kl,
    batch_overlap,
    chol_from_params,
    chol_grad_to_params,
    kl_divergence,
)
from ..optimize import NlpProblem, SolverConfig, solve
from ..safety import SafetyConfig, expected_door_safety, expected_door_safety_batch, step_overlap
from ..scenario import Scenario, frame_origin, intent, swap_agents
from .common import (
    JacobianBuilder,
    Layout,
    PlannerConfig,
    PlanResult,
    PreferenceTrajectory,
    Trajectory,
    agents_swapped,
)
from .waypoint import _Cached, add_anchor, add_kinematics


def kl_cost(pref: PreferenceTrajectory, prior: PreferenceTrajectory) -> float:
    """Summed per-step KL(pref_t || prior_t)."""
    if len(pref) != len(prior):
        raise ValueError(f"length mismatch: {len(pref)} vs {len(prior)}")
    return float(sum(kl_divergence(p, q) for p, q in zip(pref.steps, prior.steps)))


def _cov_band(L, log_tr_max, log_var_min):
    """Smooth sufficient conditions for the eigenvalue band of L L^T.

    ``trace <= tr_max`` bounds the largest eigenvalue and
    ``det / trace >= var_min`` bounds the smallest one from below.
    Both are returned in log form with gradients w.r.t. the log-Cholesky
    parameters.
    """
    a, b, c = L[:, 0, 0], L[:, 1, 0], L[:, 1, 1]
    tr = a * a + b * b + c * c
    dtr = np.stack([2 * a * a, 2 * b, 2 * c * c], axis=1) / tr[:, None]
    ceiling = log_tr_max - np.log(tr)
    floor = 2 * np.log(a) + 2 * np.log(c) - np.log(tr) - log_var_min
    dfloor = np.array([2.0, 0.0, 2.0]) - dtr
    return ceiling, -dtr, floor, dfloor


def _dsc_eval(scenario, safety, planner, means, starts, layout, scale):
    specs = [scenario.robot, scenario.pedestrian]
    n = scenario.horizon_steps
    var_bar = [s.prior_sigma ** 2 for s in specs]
    cov_bar_inv = [np.broadcast_to(np.eye(2) / v, (n, 2, 2)) for v in var_bar]
    logdet_bar = [2.0 * np.log(v) for v in var_bar]
    prior_params = [np.array([np.log(s.prior_sigma), 0.0, np.log(s.prior_sigma)]) for s in specs]
    log_tr_max = [np.log(planner.sigma_max_factor * v) for v in var_bar]
    log_var_min = 2.0 * np.log(planner.sigma_min)
    eps = safety.epsilon_overlap

    def fn(z):
        mu = [z[layout.mu[a]] * scale for a in range(2)]
        prm = [z[layout.cov[a]] for a in range(2)]
        L = [chol_from_params(p) for p in prm]
        obj = 0.0
        grad = np.zeros(layout.dim)
        for a in range(2):
            kl, d_mu, d_L = batch_kl(mu[a], L[a], means[a], cov_bar_inv[a], logdet_bar[a])
            obj += float(np.sum(kl))
            grad[layout.mu[a]] = d_mu * scale
            grad[layout.cov[a]] = chol_grad_to_params(d_L, L[a])

        # safety rows start at step 1; step 0 is the anchored current state
        jb = JacobianBuilder(layout.dim)
        mr, mh = [layout.mu[a][1:] for a in range(2)]
        cr, ch = [layout.cov[a][1:] for a in range(2)]
        Lr, Lh = L[0][1:], L[1][1:]
        ov, d_mu_r, d_L_r, d_L_h = batch_overlap(mu[0][1:], Lr, mu[1][1:], Lh)
        jb.add(1.0 - ov / eps, [
            (mr, -d_mu_r * scale / eps),
            (mh, d_mu_r * scale / eps),
            (cr, -chol_grad_to_params(d_L_r, Lr) / eps),
            (ch, -chol_grad_to_params(d_L_h, Lh) / eps),
        ])
        for a in range(2):
            La = L[a][1:]
            ev, e_mu, e_L = expected_door_safety_batch(
                mu[a][1:], La, scenario, safety, specs[a].radius, planner.n_nodes, centered=True
            )
            jb.add(ev - safety.gamma_door_exp, [
                (layout.mu[a][1:], e_mu * scale),
                (layout.cov[a][1:], chol_grad_to_params(e_L, La)),
            ])
            add_kinematics(jb, mu[a], layout.mu[a], specs[a], scenario.dt, scale)
            ceil, d_ceil, flo, d_flo = _cov_band(L[a], log_tr_max[a], log_var_min)
            jb.add(ceil, [(layout.cov[a], d_ceil)])
            jb.add(flo, [(layout.cov[a], d_flo)])
            add_anchor(jb, mu[a][0] - starts[a], layout.mu[a][0], scale)
            add_anchor(jb, prm[a][0] - prior_params[a], layout.cov[a][0])
        g, jac = jb.result()
        return obj, grad, g, jac

    return fn


def dsc_margins(scenario, safety, planner, robot_pref, ped_pref, starts) -> dict:
    """Independent re-evaluation of every distribution-space constraint.

    Positive values mean satisfied. Overlap and wall safety are checked from
    step 1 on, as imposed; the eigenvalue band is checked on the actual
    eigenvalues rather than the smooth surrogate used by the solver.
    """
    specs = [scenario.robot, scenario.pedestrian]
    out = {
        "overlap": float(min(safety.epsilon_overlap - step_overlap(p, q)
                             for p, q in zip(robot_pref.steps[1:], ped_pref.steps[1:]))),
    }
    for name, spec, pref, start in zip(("robot", "pedestrian"), specs, (robot_pref, ped_pref), starts):
        ev = [expected_door_safety(g, scenario, safety, spec.radius, planner.n_nodes) for g in pref.steps[1:]]
        eig = np.array([np.linalg.eigvalsh(g.cov) for g in pref.steps])
        steps = np.hypot(*np.diff(pref.means(), axis=0).T)
        out[f"door_{name}"] = float(min(ev) - safety.gamma_door_exp)
        out[f"kinematic_{name}"] = float(np.min(spec.v_max * scenario.dt - steps))
        out[f"eig_floor_{name}"] = float(np.min(eig) - planner.sigma_min ** 2)
        out[f"eig_ceiling_{name}"] = float(planner.sigma_max_factor * spec.prior_sigma ** 2 - np.max(eig))
        out[f"anchor_{name}"] = -float(max(
            np.max(np.abs(pref.steps[0].mean - start)),
            np.max(np.abs(pref.steps[0].cov - spec.prior_sigma ** 2 * np.eye(2))),
        ))
    return out


def _dsc_setup(scenario, safety, planner, robot_start=None, pedestrian_start=None):
    starts = [
        np.array(robot_start if robot_start is not None else scenario.robot.start, dtype=float),
        np.array(pedestrian_start if pedestrian_start is not None else scenario.pedestrian.start, dtype=float),
    ]
    order = [1, 0] if agents_swapped(scenario) else [0, 1]
    ordered = swap_agents(scenario) if order[0] else scenario
    specs = [ordered.robot, ordered.pedestrian]
    # the solver works in door-centered coordinates, where reflection is an exact sign flip
    origin = frame_origin(scenario)
    means = [intent(specs[a], scenario, start=starts[order[a]], centered=True) for a in range(2)]
    scale = max(scenario.room_width, scenario.room_height)
    layout = Layout(scenario.horizon_steps, 2, with_cov=True)
    x0 = np.zeros(layout.dim)
    for a in range(2):
        x0[layout.mu[a]] = means[a] / scale
        x0[layout.cov[a]] = np.array([np.log(specs[a].prior_sigma), 0.0, np.log(specs[a].prior_sigma)])
    fn = _dsc_eval(ordered, safety, planner, means, [starts[i] - origin for i in order], layout, scale)
    # (mean block, covariance block, intent) of the robot, then of the pedestrian
    blocks = [(layout.mu[order.index(i)], layout.cov[order.index(i)], means[order.index(i)]) for i in range(2)]
    return _Cached(fn).problem(x0), starts, origin, scale, blocks


def dsc_problem(scenario: Scenario, safety: SafetyConfig | None = None, planner: PlannerConfig | None = None,
                robot_start=None, pedestrian_start=None) -> NlpProblem:
    """The distribution-space program, initialized at both priors.

    Each agent's block holds per-step scaled door-centered means followed by
    log-Cholesky covariance parameters; block order follows
    :func:`agents_swapped`.
    """
    return _dsc_setup(scenario, safety or SafetyConfig(), planner or PlannerConfig(),
                      robot_start, pedestrian_start)[0]


def plan_dsc(scenario: Scenario, safety: SafetyConfig | None = None, solver: SolverConfig | None = None,
             planner: PlannerConfig | None = None, robot_start=None, pedestrian_start=None,
             warm_start=None) -> PlanResult:
    """Jointly plan both agents' per-step Gaussian preferences, starting from the priors.

    ``warm_start`` replaces the prior-based initial decision vector.
    """
    safety = safety or SafetyConfig()
    solver = solver or SolverConfig()
    planner = planner or PlannerConfig()
    specs = [scenario.robot, scenario.pedestrian]
    problem, starts, origin, scale, blocks = _dsc_setup(scenario, safety, planner, robot_start, pedestrian_start)
    if warm_start is not None:
        problem.initial_point = np.asarray(warm_start, dtype=float).ravel()
    report = solve(problem, solver)

    z = report.solution
    prefs, priors = [], []
    for a, (mu_idx, cov_idx, means) in enumerate(blocks):
        mu = z[mu_idx] * scale + origin
        L = chol_from_params(z[cov_idx])
        covs = L @ np.swapaxes(L, 1, 2)
        covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
        prefs.append(PreferenceTrajectory.from_arrays(mu, covs, scenario.dt))
        prior_cov = specs[a].prior_sigma ** 2 * np.eye(2)
        priors.append(PreferenceTrajectory([Gaussian2(m + origin, prior_cov) for m in means], scenario.dt))

    return PlanResult(
        "dsc",
        Trajectory(prefs[0].means(), scenario.dt),
        Trajectory(prefs[1].means(), scenario.dt),
        report,
        robot_pref=prefs[0],
        pedestrian_pref=prefs[1],
        kl_cost_robot=kl_cost(prefs[0], priors[0]),
        kl_cost_pedestrian=kl_cost(prefs[1], priors[1]),
        margins=dsc_margins(scenario, safety, planner, prefs[0], prefs[1], starts),
    )
