import dataclasses
import time

import numpy as np
import pytest

from prefplan.artifacts_io import read_episode
from prefplan.cli import main
from prefplan.config import Configs, canonical_configs
from prefplan.scenario import Scenario, mirror_scenario, swap_agents
from prefplan.sim import STRATEGIES, run_receding_horizon, run_single_shot


def far_scenario(scenario: Scenario, offset: float = 100.0) -> Scenario:
    """The pedestrian moved ``offset`` meters to the right, outside any interaction."""
    p = scenario.pedestrian
    moved = dataclasses.replace(p, start=(p.start[0] + offset, p.start[1]), goal=(p.goal[0] + offset, p.goal[1]))
    return dataclasses.replace(scenario, pedestrian=moved)


def flip_x(points, scenario):
    out = np.array(points, dtype=float, copy=True)
    out[..., 0] = 2 * scenario.door_center_x - out[..., 0]
    return out


@pytest.fixture(scope="session")
def timings() -> dict:
    """Wall-clock seconds spent building each expensive fixture."""
    return {}


def _timed(timings, name, fn):
    t0 = time.perf_counter()
    out = fn()
    timings[name] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def configs() -> Configs:
    return canonical_configs()


@pytest.fixture(scope="session")
def canonical(configs, timings):
    """Single-shot episodes of every strategy on the canonical scenario."""
    return _timed(timings, "canonical",
                  lambda: {s: run_single_shot(configs.scenario, s, configs) for s in STRATEGIES})


@pytest.fixture(scope="session")
def mirrored(configs, timings):
    sc = mirror_scenario(configs.scenario)
    return _timed(timings, "mirrored", lambda: {s: run_single_shot(sc, s, configs) for s in STRATEGIES})


@pytest.fixture(scope="session")
def far(configs, timings):
    sc = far_scenario(configs.scenario)
    return _timed(timings, "far", lambda: {s: run_single_shot(sc, s, configs) for s in STRATEGIES})


@pytest.fixture(scope="session")
def swapped_tsc(configs):
    return run_single_shot(swap_agents(configs.scenario), "tsc", configs)


@pytest.fixture(scope="session")
def simulated_dsc(tmp_path_factory, timings):
    """``prefplan simulate`` with dsc and a mirror pedestrian: (exit code, episode read back, out dir)."""
    out = tmp_path_factory.mktemp("simulate_dsc")
    argv = ["simulate", "--strategy", "dsc", "--pedestrian", "mirror", "--replan-every", "2", "--out", str(out)]
    code = _timed(timings, "simulate_dsc", lambda: main(argv))
    return code, read_episode(out / "dsc_mirror_episode.json"), out


@pytest.fixture(scope="session")
def closed_loop_ptp_scripted(configs):
    return run_receding_horizon(configs.scenario, "ptp", configs, replan_every=2, pedestrian_model="scripted")
