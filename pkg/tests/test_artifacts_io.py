import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from prefplan.artifacts_io import (
    NONE_TOKEN,
    ArtifactError,
    ellipse_geometry,
    episode_from_dict,
    episode_to_dict,
    metrics_columns,
    read_episode,
    read_metrics_table,
    render_episode,
    render_episode_svg,
    write_episode,
    write_metrics_table,
)
from prefplan.gaussian import Gaussian2
from prefplan.planners import PreferenceTrajectory, Trajectory
from prefplan.scenario import Scenario
from prefplan.sim import EpisodeResult, compute_metrics

SVG = "{http://www.w3.org/2000/svg}"


def _assert_same_episode(a, b):
    assert episode_to_dict(a) == episode_to_dict(b)
    for name in ("robot_executed", "pedestrian_executed"):
        assert getattr(a, name).points.tobytes() == getattr(b, name).points.tobytes()
    for name in ("robot_pref", "pedestrian_pref"):
        pa, pb = getattr(a, name), getattr(b, name)
        assert (pa is None) == (pb is None)
        if pa is not None:
            assert pa.means().tobytes() == pb.means().tobytes()
            assert pa.covs().tobytes() == pb.covs().tobytes()


# ---------------------------------------------------------------------------
# episode documents

@pytest.mark.parametrize("strategy", ["ptp", "tsc", "dsc"])
def test_episode_round_trip_is_bitwise(canonical, tmp_path, strategy):
    path = tmp_path / f"{strategy}.json"
    write_episode(canonical[strategy], path)
    back = read_episode(path)
    _assert_same_episode(canonical[strategy], back)
    assert back.metrics == canonical[strategy].metrics
    assert back.configs == canonical[strategy].configs


def test_closed_loop_round_trip(closed_loop_ptp_scripted, tmp_path):
    write_episode(closed_loop_ptp_scripted, tmp_path / "ep.json")
    back = read_episode(tmp_path / "ep.json")
    _assert_same_episode(closed_loop_ptp_scripted, back)
    assert back.replan_every == 2 and back.pedestrian_model == "scripted"
    assert len(back.per_replan_plans) == len(closed_loop_ptp_scripted.per_replan_plans)


def test_dsc_document_stores_every_covariance(canonical, configs):
    doc = episode_to_dict(canonical["dsc"])
    n = configs.scenario.horizon_steps
    for key in ("robot_preference", "pedestrian_preference"):
        assert len(doc[key]["covariances"]) == n
        assert len(doc[key]["means"]) == n
    assert len(doc["plans"][0]["robot_pref"]["covariances"]) == n
    assert episode_to_dict(canonical["ptp"])["robot_preference"] is None


def test_unwritable_path_names_the_path(canonical, tmp_path):
    path = tmp_path / "missing" / "ep.json"
    with pytest.raises(ArtifactError, match="missing"):
        write_episode(canonical["ptp"], path)
    with pytest.raises(ArtifactError, match="nothing.json"):
        read_episode(tmp_path / "nothing.json")


def test_unknown_schema_version(canonical):
    doc = episode_to_dict(canonical["ptp"])
    doc["schema_version"] = 99
    with pytest.raises(ValueError, match="schema_version"):
        episode_from_dict(doc)


# ---------------------------------------------------------------------------
# metrics tables

def _no_crossing_episode():
    sc = Scenario()
    ep = EpisodeResult("ptp", Trajectory(np.tile([2.0, 2.0], (4, 1)), sc.dt),
                       Trajectory(np.tile([8.0, 8.0], (4, 1)), sc.dt), [])
    ep.metrics = compute_metrics(ep, sc)
    return ep


def test_metrics_table_rows_and_columns(canonical, tmp_path):
    path = tmp_path / "metrics.csv"
    write_metrics_table(list(canonical.values()), path)
    rows = read_metrics_table(path)
    assert [r["strategy"] for r in rows] == ["ptp", "tsc", "dsc"]
    assert list(rows[0]) == metrics_columns()
    assert rows[0]["kl_total"] == NONE_TOKEN
    assert float(rows[2]["kl_total"]) == canonical["dsc"].metrics.kl_total
    assert b"\r\n" not in path.read_bytes()


def test_absent_crossing_is_written_as_none(tmp_path):
    path = tmp_path / "m.csv"
    write_metrics_table([_no_crossing_episode()], path)
    row = read_metrics_table(path)[0]
    assert row["robot_cross_step"] == NONE_TOKEN
    assert row["simultaneity_gap"] == NONE_TOKEN


def test_extra_columns_are_prepended(tmp_path):
    path = tmp_path / "m.csv"
    ep = _no_crossing_episode()
    write_metrics_table([ep, ep], path, {"param": ["door_width"] * 2, "value": [1.6, 2.4]})
    rows = read_metrics_table(path)
    assert list(rows[0])[:3] == ["param", "value", "strategy"]
    assert [r["value"] for r in rows] == ["1.6", "2.4"]
    with pytest.raises(ValueError, match="extra column"):
        write_metrics_table([ep], path, {"value": [1.0, 2.0]})


def test_empty_metrics_table_is_rejected(tmp_path):
    with pytest.raises(ValueError, match="at least one"):
        write_metrics_table([], tmp_path / "m.csv")


# ---------------------------------------------------------------------------
# figures

def _transform(svg_text):
    m = re.search(r"scale=(\S+) margin=(\S+) xmin=(\S+) ymax=(\S+?);", svg_text)
    scale, margin, xmin, ymax = map(float, m.groups())
    return scale, lambda x: margin + scale * (x - xmin), lambda y: margin + scale * (ymax - y)


def _ellipses(svg_text):
    return ET.fromstring(svg_text.split("\n", 1)[1]).iter(SVG + "ellipse")


def test_ellipse_counts(canonical, configs):
    sc = configs.scenario
    dsc = list(_ellipses(render_episode_svg(canonical["dsc"], sc)))
    assert len(dsc) == 2 * sc.horizon_steps
    assert sum("robot" in e.get("class") for e in dsc) == sc.horizon_steps
    for s in ("ptp", "tsc"):
        assert not list(_ellipses(render_episode_svg(canonical[s], sc)))


@pytest.mark.parametrize("a,b", [(0.5, 0.2), (0.2, 0.5), (0.3, 0.3)])
def test_diagonal_covariance_radii_and_center(a, b):
    sc = Scenario()
    mean = np.array([3.0, 4.0])
    pref = PreferenceTrajectory([Gaussian2(mean, np.diag([a * a, b * b]))], sc.dt)
    ep = EpisodeResult("dsc", Trajectory(mean[None], sc.dt), Trajectory(np.array([[8.0, 8.0]]), sc.dt), [],
                       robot_pref=pref)
    text = render_episode_svg(ep, sc)
    scale, tx, ty = _transform(text)
    (el,) = list(_ellipses(text))
    assert float(el.get("cx")) == pytest.approx(tx(3.0), abs=1e-9)
    assert float(el.get("cy")) == pytest.approx(ty(4.0), abs=1e-9)
    rx, ry = float(el.get("rx")) / scale, float(el.get("ry")) / scale
    angle = float(re.match(r"rotate\((\S+) ", el.get("transform")).group(1))
    # rotating the document x-axis by `angle` (clockwise positive) gives the world axis of rx
    world_x_axis_is_rx = abs(math.cos(math.radians(angle))) > 0.5
    along_x, along_y = (rx, ry) if world_x_axis_is_rx else (ry, rx)
    assert along_x == pytest.approx(a, abs=1e-9)
    assert along_y == pytest.approx(b, abs=1e-9)


@pytest.mark.parametrize("theta", [0.0, 30.0, 75.0, -45.0])
def test_ellipse_geometry_recovers_a_rotation(theta):
    t = math.radians(theta)
    rot = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    major, minor, angle = ellipse_geometry(rot @ np.diag([0.36, 0.04]) @ rot.T)
    assert (major, minor) == pytest.approx((0.6, 0.2), abs=1e-12)
    assert angle == pytest.approx(theta, abs=1e-9)


def _all_coordinates(root):
    for el in root.iter():
        tag = el.tag.replace(SVG, "")
        if tag == "polyline":
            for pair in el.get("points").split():
                yield tuple(map(float, pair.split(",")))
        elif tag in ("circle", "ellipse"):
            cx, cy = float(el.get("cx")), float(el.get("cy"))
            r = float(el.get("r") or max(float(el.get("rx")), float(el.get("ry"))))
            yield cx - r, cy - r
            yield cx + r, cy + r
        elif tag == "rect":
            x, y = float(el.get("x")), float(el.get("y"))
            yield x, y
            yield x + float(el.get("width")), y + float(el.get("height"))


@pytest.mark.parametrize("strategy", ["ptp", "tsc", "dsc"])
def test_figure_is_inside_the_viewport(canonical, configs, strategy):
    root = ET.fromstring(render_episode_svg(canonical[strategy], configs.scenario).split("\n", 1)[1])
    width, height = float(root.get("width")), float(root.get("height"))
    for x, y in _all_coordinates(root):
        assert -1e-9 <= x <= width + 1e-9 and -1e-9 <= y <= height + 1e-9


def test_executed_paths_are_solid_and_intents_dashed(canonical, configs):
    root = ET.fromstring(render_episode_svg(canonical["ptp"], configs.scenario).split("\n", 1)[1])
    lines = {el.get("class"): el for el in root.iter(SVG + "polyline")}
    assert lines["trajectory pedestrian"].get("stroke-dasharray") is None
    assert lines["trajectory robot"].get("stroke-dasharray") is None
    assert lines["intent robot"].get("stroke-dasharray")


def test_figure_bytes_are_deterministic(canonical, configs, tmp_path):
    render_episode(canonical["dsc"], configs.scenario, tmp_path / "a.svg")
    render_episode(canonical["dsc"], configs.scenario, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
