import numpy as np
import pytest

from conftest import far_scenario
from prefplan.planners import Trajectory
from prefplan.scenario import AgentSpec, Scenario, intent, intent_length
from prefplan.sim import EpisodeResult, compute_metrics, run_receding_horizon, run_single_shot

SC = Scenario()


def _episode(robot_points, ped_points, dt=0.4):
    return EpisodeResult("ptp", Trajectory(robot_points, dt), Trajectory(ped_points, dt), [])


# ---------------------------------------------------------------------------
# metrics

def test_vertical_crossing_step():
    robot = np.column_stack([np.full(21, 5.0), 1.0 + 0.4 * np.arange(21)])
    ped = np.tile([8.0, 9.0], (21, 1))
    m = compute_metrics(_episode(robot, ped), SC)
    assert m.robot_cross_step == 10
    assert m.pedestrian_cross_step is None
    assert m.simultaneity_gap is None


def test_intent_execution_has_unit_path_ratio():
    # the sampled intent chords across the bend at the door center, a fraction of a percent short
    m = compute_metrics(_episode(intent(SC.robot, SC), intent(SC.pedestrian, SC)), SC)
    assert m.path_ratio_robot == pytest.approx(1.0, abs=2e-3)
    assert m.path_ratio_pedestrian == pytest.approx(1.0, abs=2e-3)
    assert m.robot_cross_step == m.pedestrian_cross_step
    assert m.simultaneity_gap == 0.0


def test_stationary_agents_pair_distance():
    m = compute_metrics(_episode(np.tile([2.0, 2.0], (5, 1)), np.tile([3.0, 2.0], (5, 1))), SC)
    assert m.min_pair_distance == pytest.approx(1.0)
    assert m.min_speed_robot == 0.0
    assert m.flexibility_min_robot is None and m.kl_total is None


def test_min_speed_ignores_rest_at_goal():
    goal = np.array(SC.robot.goal)
    robot = np.vstack([goal - [0.0, 0.4 * k] for k in range(10, -1, -1)] + [goal] * 5)
    m = compute_metrics(_episode(robot, np.tile([8.0, 9.0], (16, 1))), SC)
    assert m.min_speed_robot == pytest.approx(1.0, rel=1e-9)


# ---------------------------------------------------------------------------
# episode contracts

def test_invalid_strategy():
    with pytest.raises(ValueError, match="unknown strategy"):
        run_single_shot(SC, "mpc")
    with pytest.raises(ValueError, match="unknown strategy"):
        run_receding_horizon(SC, "mpc")


@pytest.mark.parametrize("every", [0, -1, 1.5])
def test_replan_every_must_be_a_positive_integer(every):
    with pytest.raises(ValueError, match="replan_every"):
        run_receding_horizon(SC, "ptp", replan_every=every)


def test_unknown_pedestrian_model():
    with pytest.raises(ValueError, match="pedestrian model"):
        run_receding_horizon(SC, "ptp", pedestrian_model="teleport")


def test_single_shot_has_one_plan(canonical):
    for ep in canonical.values():
        assert len(ep.per_replan_plans) == 1
        assert ep.mode == "single_shot"


def test_far_ptp_single_shot_has_unit_path_ratio(far):
    assert far["ptp"].metrics.path_ratio_robot == pytest.approx(1.0, abs=2e-3)


@pytest.mark.parametrize("strategy", ["ptp", "tsc", "dsc"])
def test_unobstructed_receding_horizon_reaches_goal_on_time(configs, strategy):
    sc = far_scenario(configs.scenario)
    ep = run_receding_horizon(sc, strategy, configs, replan_every=5, pedestrian_model="scripted")
    assert not ep.timed_out
    dist = np.hypot(*(ep.robot_executed.points - sc.robot.goal).T)
    arrival = int(np.nonzero(dist <= 0.05)[0][0])
    intent_steps = int(np.ceil(intent_length(sc.robot, sc) / (sc.robot.v_pref * sc.dt)))
    assert arrival <= intent_steps + 2


def test_receding_horizon_is_deterministic_and_continuous(configs):
    sc = far_scenario(configs.scenario)
    a = run_receding_horizon(sc, "tsc", configs, replan_every=3, pedestrian_model="mirror")
    b = run_receding_horizon(sc, "tsc", configs, replan_every=3, pedestrian_model="mirror")
    assert a.robot_executed.points.tobytes() == b.robot_executed.points.tobytes()
    assert a.pedestrian_executed.points.tobytes() == b.pedestrian_executed.points.tobytes()
    _check_continuity(a, sc)


def _check_continuity(ep, sc):
    k = ep.replan_every
    pts = ep.robot_executed.points
    for i, plan in enumerate(ep.per_replan_plans):
        # each converged plan is anchored where the previous segment ended; execution
        # always steps from the actual state, so the executed path stays continuous either way
        if not plan.report.converged:
            continue
        np.testing.assert_allclose(plan.robot_traj.points[0], pts[i * k], atol=1e-4)
    assert ep.robot_executed.is_feasible(sc.robot.v_max)
    assert ep.pedestrian_executed.is_feasible(sc.pedestrian.v_max)


def test_scripted_ptp_shows_freeze_spectrum_evidence(closed_loop_ptp_scripted, configs):
    ep = closed_loop_ptp_scripted
    m = ep.metrics
    v_pref = configs.scenario.robot.v_pref
    assert ep.timed_out or m.min_speed_robot < 0.1 * v_pref or m.path_ratio_robot >= 1.15, m
    _check_continuity(ep, configs.scenario)


def test_mirror_dsc_closed_loop_reaches_goals_safely(simulated_dsc, configs):
    code, ep, _ = simulated_dsc
    sc = configs.scenario
    assert code == 0
    assert not ep.timed_out
    assert ep.metrics.min_pair_distance >= sc.robot.radius + sc.pedestrian.radius
    _check_continuity(ep, sc)


def test_path_ratios_at_least_one(canonical, closed_loop_ptp_scripted):
    # up to the chord sampling of the bend, no plan here is shorter than the intent
    episodes = list(canonical.values()) + [closed_loop_ptp_scripted]
    for ep in episodes:
        assert ep.metrics.path_ratio_robot >= 1 - 2e-3
        assert ep.metrics.min_pair_distance >= 0 and ep.metrics.min_wall_distance >= 0


def test_corner_cutting_can_shorten_a_path():
    # an executed path may legitimately cut the intent's bend at the door center
    spec = AgentSpec((3.0, 1.0), (5.0, 9.0))
    sc = Scenario(robot=spec)
    cut = np.array([spec.start, [4.6, 5.0], spec.goal])
    ep = _episode(cut, intent(sc.pedestrian, sc)[:3])
    assert compute_metrics(ep, sc).path_ratio_robot < 1.0
