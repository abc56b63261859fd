"""Episode documents, metrics tables and SVG figures.

Episode documents are JSON (``schema_version`` 1). Floats are written with
Python's shortest round-trip representation, so reading a document back
gives bitwise-equal arrays. Layout::

    {
      "schema_version": 1,
      "strategy": "dsc", "mode": "single_shot" | "receding_horizon",
      "pedestrian_model": null | "mirror" | "scripted",
      "replan_every": null | int, "timed_out": bool,
      "config": {...same document as the config loader reads...},
      "robot_executed": {"dt": 0.4, "points": [[x, y], ...]},
      "pedestrian_executed": {...},
      "robot_preference": null | {"dt": .., "means": [[x, y], ...],
                                  "covariances": [[[a, b], [b, c]], ...]},
      "pedestrian_preference": ...,
      "plans": [{"strategy", "robot_traj", "pedestrian_traj", "solve_report",
                 "robot_pref", "pedestrian_pref", "kl_cost_robot",
                 "kl_cost_pedestrian", "margins"}, ...],
      "metrics": {...MetricsReport fields...}
    }
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .config import configs_from_dict, configs_to_dict
from .optimize import SolveReport
from .planners import PlanResult, PreferenceTrajectory, Trajectory
from .scenario import Scenario, intent
from .sim import EpisodeResult, MetricsReport

SCHEMA_VERSION = 1
NONE_TOKEN = "none"

# figure layout: world meters -> document units
SVG_SCALE = 50.0
SVG_MARGIN = 20.0


class ArtifactError(OSError):
    """Reading or writing an artifact failed; the message names the path."""


# ---------------------------------------------------------------------------
# episode documents

def _traj_to_dict(t: Trajectory | None):
    if t is None:
        return None
    return {"dt": t.dt, "points": t.points.tolist()}


def _traj_from_dict(d) -> Trajectory | None:
    if d is None:
        return None
    return Trajectory(np.array(d["points"], dtype=float).reshape(-1, 2), d["dt"])


def _pref_to_dict(p: PreferenceTrajectory | None):
    if p is None:
        return None
    return {"dt": p.dt, "means": p.means().tolist(), "covariances": p.covs().tolist()}


def _pref_from_dict(d) -> PreferenceTrajectory | None:
    if d is None:
        return None
    means = np.array(d["means"], dtype=float).reshape(-1, 2)
    covs = np.array(d["covariances"], dtype=float).reshape(-1, 2, 2)
    return PreferenceTrajectory.from_arrays(means, covs, d["dt"])


def _plan_to_dict(p: PlanResult) -> dict:
    return {
        "strategy": p.strategy,
        "robot_traj": _traj_to_dict(p.robot_traj),
        "pedestrian_traj": _traj_to_dict(p.pedestrian_traj),
        "solve_report": p.report.to_dict(),
        "robot_pref": _pref_to_dict(p.robot_pref),
        "pedestrian_pref": _pref_to_dict(p.pedestrian_pref),
        "kl_cost_robot": p.kl_cost_robot,
        "kl_cost_pedestrian": p.kl_cost_pedestrian,
        "margins": dict(p.margins),
    }


def _plan_from_dict(d: dict) -> PlanResult:
    return PlanResult(
        d["strategy"],
        _traj_from_dict(d["robot_traj"]),
        _traj_from_dict(d["pedestrian_traj"]),
        SolveReport.from_dict(d["solve_report"]),
        robot_pref=_pref_from_dict(d["robot_pref"]),
        pedestrian_pref=_pref_from_dict(d["pedestrian_pref"]),
        kl_cost_robot=d["kl_cost_robot"],
        kl_cost_pedestrian=d["kl_cost_pedestrian"],
        margins=dict(d["margins"]),
    )


def episode_to_dict(ep: EpisodeResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "strategy": ep.strategy,
        "mode": ep.mode,
        "pedestrian_model": ep.pedestrian_model,
        "replan_every": ep.replan_every,
        "timed_out": ep.timed_out,
        "config": configs_to_dict(ep.configs),
        "robot_executed": _traj_to_dict(ep.robot_executed),
        "pedestrian_executed": _traj_to_dict(ep.pedestrian_executed),
        "robot_preference": _pref_to_dict(ep.robot_pref),
        "pedestrian_preference": _pref_to_dict(ep.pedestrian_pref),
        "plans": [_plan_to_dict(p) for p in ep.per_replan_plans],
        "metrics": None if ep.metrics is None else ep.metrics.to_dict(),
    }


def episode_from_dict(doc: dict) -> EpisodeResult:
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported episode schema_version {version!r} (expected {SCHEMA_VERSION})")
    return EpisodeResult(
        strategy=doc["strategy"],
        robot_executed=_traj_from_dict(doc["robot_executed"]),
        pedestrian_executed=_traj_from_dict(doc["pedestrian_executed"]),
        per_replan_plans=[_plan_from_dict(p) for p in doc["plans"]],
        metrics=None if doc["metrics"] is None else MetricsReport(**doc["metrics"]),
        configs=configs_from_dict(doc["config"]),
        mode=doc["mode"],
        pedestrian_model=doc["pedestrian_model"],
        replan_every=doc["replan_every"],
        timed_out=doc["timed_out"],
        robot_pref=_pref_from_dict(doc["robot_preference"]),
        pedestrian_pref=_pref_from_dict(doc["pedestrian_preference"]),
    )


def _write_text(path, text: str):
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_episode(episode: EpisodeResult, path) -> None:
    _write_text(path, json.dumps(episode_to_dict(episode), indent=1) + "\n")


def read_episode(path) -> EpisodeResult:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return episode_from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# metrics table

def _cell(v) -> str:
    if v is None:
        return NONE_TOKEN
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_columns() -> list[str]:
    return ["strategy"] + MetricsReport.field_names()


def write_metrics_table(episodes, path, extra_columns: dict | None = None) -> None:
    """Comma-separated table with one row per episode.

    Columns are ``strategy`` followed by the MetricsReport fields in
    declaration order. ``extra_columns`` (name -> one value per episode) are
    prepended, e.g. the swept parameter. Absent values are written as
    ``none``.
    """
    episodes = list(episodes)
    if not episodes:
        raise ValueError("write_metrics_table needs at least one episode")
    extra = dict(extra_columns or {})
    for name, vals in extra.items():
        if len(vals) != len(episodes):
            raise ValueError(f"extra column {name!r} has {len(vals)} values for {len(episodes)} episodes")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(extra) + metrics_columns())
    for i, ep in enumerate(episodes):
        if ep.metrics is None:
            raise ValueError(f"episode {i} has no metrics")
        row = [_cell(vals[i]) for vals in extra.values()]
        row.append(ep.strategy)
        row.extend(_cell(getattr(ep.metrics, f)) for f in MetricsReport.field_names())
        writer.writerow(row)
    _write_text(path, buf.getvalue())


def read_metrics_table(path) -> list[dict]:
    """Rows of a metrics table as dicts of strings (``none`` kept verbatim)."""
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# figures

ROBOT_COLOR = "#1f5fbf"
PEDESTRIAN_COLOR = "#c0392b"


def _num(v: float) -> str:
    v = float(v)
    return "0" if v == 0 else repr(v)


def ellipse_geometry(cov) -> tuple[float, float, float]:
    """Semi-axes (major, minor) and major-axis angle in degrees of a 1-sigma ellipse.

    The angle is measured counter-clockwise from +x in world coordinates and
    normalized to (-90, 90].
    """
    vals, vecs = np.linalg.eigh(np.asarray(cov, dtype=float))
    major, minor = math.sqrt(max(vals[1], 0.0)), math.sqrt(max(vals[0], 0.0))
    v = vecs[:, 1]
    angle = math.degrees(math.atan2(v[1], v[0]))
    if angle > 90.0:
        angle -= 180.0
    elif angle <= -90.0:
        angle += 180.0
    return major, minor, angle


def envelope(pref: PreferenceTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Left and right extrema of the 1-sigma ellipses, normal to the direction of travel.

    The extremum of the ellipse of covariance S in unit direction n is
    ``mean + S n / sqrt(n^T S n)``.
    """
    means = pref.means()
    covs = pref.covs()
    tangent = np.gradient(means, axis=0) if len(means) > 1 else np.array([[0.0, 1.0]])
    left, right = [], []
    for m, s, t in zip(means, covs, tangent):
        norm = math.hypot(t[0], t[1])
        t = t / norm if norm > 1e-12 else np.array([0.0, 1.0])
        n = np.array([-t[1], t[0]])
        off = s @ n / math.sqrt(n @ s @ n)
        left.append(m + off)
        right.append(m - off)
    return np.array(left), np.array(right)


class _Canvas:
    def __init__(self, xmin, xmax, ymin, ymax):
        self.xmin, self.ymax = xmin, ymax
        self.width = SVG_SCALE * (xmax - xmin) + 2 * SVG_MARGIN
        self.height = SVG_SCALE * (ymax - ymin) + 2 * SVG_MARGIN
        self.lines: list[str] = []

    def x(self, v):
        return SVG_MARGIN + SVG_SCALE * (v - self.xmin)

    def y(self, v):
        return SVG_MARGIN + SVG_SCALE * (self.ymax - v)

    def pts(self, points) -> str:
        return " ".join(f"{_num(self.x(p[0]))},{_num(self.y(p[1]))}" for p in points)

    def add(self, line: str):
        self.lines.append(line)


def _bounds(scenario: Scenario, episode: EpisodeResult, intents) -> tuple[float, float, float, float]:
    xs = [0.0, scenario.room_width]
    ys = [0.0, scenario.room_height]
    arrays = [episode.robot_executed.points, episode.pedestrian_executed.points, *intents]
    for pref in (episode.robot_pref, episode.pedestrian_pref):
        if pref is not None:
            rad = np.sqrt(np.max(np.linalg.eigvalsh(pref.covs()), axis=1))
            m = pref.means()
            arrays.append(m + rad[:, None])
            arrays.append(m - rad[:, None])
    for a in arrays:
        xs.extend([float(np.min(a[:, 0])), float(np.max(a[:, 0]))])
        ys.extend([float(np.min(a[:, 1])), float(np.max(a[:, 1]))])
    return min(xs), max(xs), min(ys), max(ys)


def render_episode_svg(episode: EpisodeResult, scenario: Scenario) -> str:
    """SVG 1.1 text of an episode figure (see :func:`render_episode`)."""
    intents = [intent(scenario.robot, scenario), intent(scenario.pedestrian, scenario)]
    xmin, xmax, ymin, ymax = _bounds(scenario, episode, intents)
    c = _Canvas(xmin, xmax, ymin, ymax)
    c.add('<?xml version="1.0" encoding="UTF-8" standalone="no"?>')
    c.add(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_num(c.width)}" '
          f'height="{_num(c.height)}" viewBox="0 0 {_num(c.width)} {_num(c.height)}">')
    c.add(f"<!-- world-to-document: scale={_num(SVG_SCALE)} margin={_num(SVG_MARGIN)} "
          f"xmin={_num(xmin)} ymax={_num(ymax)}; X = margin + scale*(x - xmin), "
          f"Y = margin + scale*(ymax - y) -->")
    c.add(f"<title>{episode.strategy} episode ({episode.mode})</title>")
    c.add("<defs>")
    for name, color in (("robot", ROBOT_COLOR), ("pedestrian", PEDESTRIAN_COLOR)):
        c.add(f'<marker id="arrow-{name}" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="8" '
              f'markerHeight="8" orient="auto"><path d="M 0 0 L 10 5 L 0 10 z" fill="{color}"/></marker>')
    c.add("</defs>")

    # room and walls
    c.add(f'<rect class="room" x="{_num(c.x(0.0))}" y="{_num(c.y(scenario.room_height))}" '
          f'width="{_num(SVG_SCALE * scenario.room_width)}" height="{_num(SVG_SCALE * scenario.room_height)}" '
          f'fill="none" stroke="#000000" stroke-width="2"/>')
    for x0, y0, x1, y1 in scenario.wall_rects():
        c.add(f'<rect class="wall" x="{_num(c.x(x0))}" y="{_num(c.y(y1))}" '
              f'width="{_num(SVG_SCALE * (x1 - x0))}" height="{_num(SVG_SCALE * (y1 - y0))}" fill="#555555"/>')

    colors = {"robot": ROBOT_COLOR, "pedestrian": PEDESTRIAN_COLOR}
    prefs = {"robot": episode.robot_pref, "pedestrian": episode.pedestrian_pref}
    executed = {"robot": episode.robot_executed, "pedestrian": episode.pedestrian_executed}
    for (name, color), path in zip(colors.items(), intents):
        c.add(f'<polyline class="intent {name}" points="{c.pts(path)}" fill="none" stroke="{color}" '
              f'stroke-opacity="0.5" stroke-width="1.5" stroke-dasharray="6,4"/>')

    for name, color in colors.items():
        pref = prefs[name]
        if pref is None:
            continue
        for g in pref.steps:
            major, minor, angle = ellipse_geometry(g.cov)
            cx, cy = c.x(g.mean[0]), c.y(g.mean[1])
            # the y flip turns a counter-clockwise world angle into a clockwise document one
            c.add(f'<ellipse class="flexibility {name}" cx="{_num(cx)}" cy="{_num(cy)}" '
                  f'rx="{_num(SVG_SCALE * major)}" ry="{_num(SVG_SCALE * minor)}" '
                  f'transform="rotate({_num(-angle)} {_num(cx)} {_num(cy)})" '
                  f'fill="{color}" fill-opacity="0.08" stroke="{color}" stroke-opacity="0.4" stroke-width="0.75"/>')
        for side in envelope(pref):
            c.add(f'<polyline class="envelope {name}" points="{c.pts(side)}" fill="none" stroke="{color}" '
                  f'stroke-width="1" stroke-dasharray="3,3"/>')

    for name, color in colors.items():
        pts = executed[name].points
        c.add(f'<polyline class="trajectory {name}" points="{c.pts(pts)}" fill="none" stroke="{color}" '
              f'stroke-width="2" marker-end="url(#arrow-{name})"/>')
        c.add(f'<circle class="start {name}" cx="{_num(c.x(pts[0, 0]))}" cy="{_num(c.y(pts[0, 1]))}" '
              f'r="4" fill="{color}"/>')
    c.add("</svg>")
    return "\n".join(c.lines) + "\n"


def render_episode(episode: EpisodeResult, scenario: Scenario, path) -> None:
    """Write an SVG 1.1 figure of the episode.

    Draws the room, the walls with their door gap, dashed intents, solid
    executed trajectories with arrowheads and start dots, and for
    distributional episodes one 1-sigma ellipse per step per agent plus a
    dashed envelope through the ellipse extrema. Output bytes depend only on
    the inputs.
    """
    _write_text(path, render_episode_svg(episode, scenario))
