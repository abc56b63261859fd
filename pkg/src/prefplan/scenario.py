"""Bottleneck-door world: geometry, agents, intents and prior preferences.

Configuration is a JSON document whose keys carry their units, e.g.::

    {
      "room": {"width_m": 10.0, "height_m": 10.0},
      "wall": {"y_m": 5.0, "door_center_x_m": 5.0, "door_width_m": 1.6,
               "thickness_m": 0.2, "clearance_min_m": 0.2},
      "time": {"horizon_steps": 30, "dt_s": 0.4},
      "robot": {"start_m": [4.0, 1.0], "goal_m": [4.0, 9.0], "radius_m": 0.3,
                "v_pref_mps": 1.0, "v_max_mps": 1.5, "prior_sigma_m": 0.3},
      "pedestrian": {...same keys as robot...},
      "safety": {...}, "planner": {...}, "solver": {...}
    }

The last three sections are optional and are read by
:func:`prefplan.config.load_config`.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .gaussian import Gaussian2


class ConfigError(ValueError):
    """Malformed or invalid configuration document."""


@dataclass(frozen=True)
class AgentSpec:
    start: tuple[float, float]
    goal: tuple[float, float]
    radius: float = 0.3
    v_pref: float = 1.0
    v_max: float = 1.5
    prior_sigma: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))


@dataclass(frozen=True)
class Scenario:
    room_width: float = 10.0
    room_height: float = 10.0
    wall_y: float = 5.0
    door_center_x: float = 5.0
    door_width: float = 1.6
    wall_thickness: float = 0.2
    horizon_steps: int = 30
    dt: float = 0.4
    robot: AgentSpec = field(default_factory=lambda: AgentSpec((4.0, 1.0), (4.0, 9.0)))
    pedestrian: AgentSpec = field(default_factory=lambda: AgentSpec((6.0, 9.0), (6.0, 1.0)))
    clearance_min: float = 0.2

    @property
    def door_center(self) -> np.ndarray:
        return np.array([self.door_center_x, self.wall_y])

    def wall_rects(self) -> np.ndarray:
        """The two wall blocks flanking the door as rows (xmin, ymin, xmax, ymax)."""
        h = 0.5 * self.wall_thickness
        left = self.door_center_x - 0.5 * self.door_width
        right = self.door_center_x + 0.5 * self.door_width
        return np.array([
            [0.0, self.wall_y - h, left, self.wall_y + h],
            [right, self.wall_y - h, self.room_width, self.wall_y + h],
        ])

    def agents(self) -> dict[str, AgentSpec]:
        return {"robot": self.robot, "pedestrian": self.pedestrian}


def _side(scenario: Scenario, p) -> float:
    return np.sign(p[1] - scenario.wall_y)


def _point_clearance(scenario: Scenario, p, radius: float) -> str | None:
    x, y = p
    if not (radius <= x <= scenario.room_width - radius and radius <= y <= scenario.room_height - radius):
        return "outside the room"
    for xmin, ymin, xmax, ymax in scenario.wall_rects():
        dx = max(xmin - x, 0.0, x - xmax)
        dy = max(ymin - y, 0.0, y - ymax)
        if np.hypot(dx, dy) < radius:
            return "overlapping the wall"
    return None


def validate_scenario(s: Scenario) -> Scenario:
    """Check every scenario invariant; raise ConfigError naming the first violation."""
    if s.room_width <= 0 or s.room_height <= 0:
        raise ConfigError("room dimensions must be positive")
    if not 0 < s.wall_y < s.room_height:
        raise ConfigError("wall_y must lie inside the room")
    if s.wall_thickness <= 0:
        raise ConfigError("wall thickness must be positive")
    if s.horizon_steps < 2:
        raise ConfigError("horizon_steps must be at least 2")
    if s.dt <= 0:
        raise ConfigError("dt must be positive")
    if s.door_width >= s.room_width:
        raise ConfigError("door must be narrower than the room")
    half = 0.5 * s.door_width
    if s.door_center_x - half <= 0 or s.door_center_x + half >= s.room_width:
        raise ConfigError("door gap must lie strictly inside the wall")
    if s.door_width < s.robot.radius + s.pedestrian.radius + s.clearance_min:
        raise ConfigError("door narrower than combined agent widths plus clearance")
    for name, a in s.agents().items():
        if a.radius <= 0:
            raise ConfigError(f"{name}: radius must be positive")
        if 2 * a.radius > s.door_width:
            raise ConfigError(f"{name}: door narrower than the agent diameter")
        if a.prior_sigma <= 0:
            raise ConfigError(f"{name}: prior_sigma must be positive")
        if not 0 < a.v_pref <= a.v_max:
            raise ConfigError(f"{name}: need 0 < v_pref <= v_max")
        for label, p in (("start", a.start), ("goal", a.goal)):
            problem = _point_clearance(s, p, a.radius)
            if problem:
                raise ConfigError(f"{name}: {label} {p} is {problem}")
        if _side(s, a.start) * _side(s, a.goal) >= 0:
            raise ConfigError(f"{name}: start and goal must lie on opposite sides of the wall")
    return s


def _point_segment_distance(x, u, v) -> float:
    d = v - u
    den = d @ d
    t = 0.0 if den == 0 else min(max(((x - u) @ d) / den, 0.0), 1.0)
    return float(np.hypot(*(x - u - t * d)))


def _segment_distance(p, q, a, b) -> float:
    """Distance between the segments pq and ab."""
    def cross(o, u, v):
        return (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0])

    if cross(a, b, p) * cross(a, b, q) < 0 and cross(p, q, a) * cross(p, q, b) < 0:
        return 0.0
    return min(_point_segment_distance(p, a, b), _point_segment_distance(q, a, b),
               _point_segment_distance(a, p, q), _point_segment_distance(b, p, q))


def wall_clearance(p, q, scenario: Scenario) -> float:
    """Smallest distance from the segment pq to the two wall blocks; 0 if it touches one."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    best = np.inf
    for xmin, ymin, xmax, ymax in scenario.wall_rects():
        if xmin <= p[0] <= xmax and ymin <= p[1] <= ymax:
            return 0.0
        corners = np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])
        for i in range(4):
            best = min(best, _segment_distance(p, q, corners[i], corners[(i + 1) % 4]))
    return float(best)


def _approach_point(end, scenario: Scenario, radius: float):
    """Door-axis waypoint between ``end`` and the door center, or None if not needed.

    A straight run from ``end`` to the door center cuts the wall corner when
    it meets the wall at a shallow angle. The returned point is the one
    nearest the wall, on the door axis and on the side of ``end``, from
    which the straight run keeps ``radius`` clearance.
    """
    c = scenario.door_center
    sgn = _side(scenario, end)

    def point(a):
        return c + np.array([0.0, sgn * a])

    if wall_clearance(end, c, scenario) >= radius:
        return None
    lo, hi = 0.0, abs(end[1] - scenario.wall_y)
    if wall_clearance(end, point(hi), scenario) >= radius:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if wall_clearance(end, point(mid), scenario) >= radius:
                hi = mid
            else:
                lo = mid
    return point(hi)


def _waypoints(spec: AgentSpec, scenario: Scenario) -> np.ndarray:
    start = np.array(spec.start)
    goal = np.array(spec.goal)
    in_room = all(0.0 <= p[0] <= scenario.room_width for p in (start, goal))
    if in_room and _side(scenario, start) * _side(scenario, goal) < 0:
        pts = [start, _approach_point(start, scenario, spec.radius), scenario.door_center,
               _approach_point(goal, scenario, spec.radius), goal]
        return np.stack([p for p in pts if p is not None])
    return np.stack([start, goal])


def frame_origin(scenario: Scenario) -> np.ndarray:
    """Origin of the door-centered frame used internally by the planners."""
    return np.array([scenario.door_center_x, 0.0])


def intent(spec: AgentSpec, scenario: Scenario, start=None, centered: bool = False) -> np.ndarray:
    """Obstacle-free preferred waypoints, shape (horizon_steps, 2).

    The path runs start -> door center -> goal at the preferred speed and
    stays at the goal once reached. Where a straight run to or from the door
    center would pass within the agent radius of a wall corner, it is routed
    through a point on the door axis instead (see :func:`_approach_point`). ``start`` overrides the agent's start
    position (used when replanning from a current state). With
    ``centered=True`` the result is expressed relative to
    :func:`frame_origin`.
    """
    if start is not None:
        spec = dataclasses.replace(spec, start=tuple(start))
    pts = _waypoints(spec, scenario)
    if centered:
        pts = pts - frame_origin(scenario)
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    out = np.empty((scenario.horizon_steps, 2))
    step = spec.v_pref * scenario.dt
    for k in range(scenario.horizon_steps):
        s = k * step
        if s >= total:
            out[k] = pts[-1]
            continue
        i = int(np.searchsorted(cum, s, side="right") - 1)
        frac = (s - cum[i]) / seg_len[i]
        out[k] = pts[i] + frac * seg[i]
    return out


def intent_length(spec: AgentSpec, scenario: Scenario, start=None) -> float:
    if start is not None:
        spec = dataclasses.replace(spec, start=tuple(start))
    pts = _waypoints(spec, scenario)
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


def prior_preference(spec: AgentSpec, scenario: Scenario, start=None) -> list[Gaussian2]:
    """Per-step prior preferences N(intent_t, prior_sigma^2 I)."""
    if spec.prior_sigma <= 0:
        raise ConfigError("prior_sigma must be positive")
    cov = spec.prior_sigma ** 2 * np.eye(2)
    return [Gaussian2(m, cov) for m in intent(spec, scenario, start=start)]


def mirror_scenario(s: Scenario) -> Scenario:
    """Reflect the world across the vertical line through the door center."""
    if abs(2.0 * s.door_center_x - s.room_width) > 1e-12:
        raise ValueError("mirroring requires the door to be centered in the room")
    c = s.door_center_x

    def flip(a: AgentSpec) -> AgentSpec:
        return dataclasses.replace(
            a, start=(2 * c - a.start[0], a.start[1]), goal=(2 * c - a.goal[0], a.goal[1])
        )

    return dataclasses.replace(s, robot=flip(s.robot), pedestrian=flip(s.pedestrian))


def swap_agents(s: Scenario) -> Scenario:
    return dataclasses.replace(s, robot=s.pedestrian, pedestrian=s.robot)


# ---------------------------------------------------------------------------
# configuration documents

_AGENT_KEYS = {
    "start_m": "start",
    "goal_m": "goal",
    "radius_m": "radius",
    "v_pref_mps": "v_pref",
    "v_max_mps": "v_max",
    "prior_sigma_m": "prior_sigma",
}
_SCENARIO_KEYS = {
    ("room", "width_m"): "room_width",
    ("room", "height_m"): "room_height",
    ("wall", "y_m"): "wall_y",
    ("wall", "door_center_x_m"): "door_center_x",
    ("wall", "door_width_m"): "door_width",
    ("wall", "thickness_m"): "wall_thickness",
    ("wall", "clearance_min_m"): "clearance_min",
    ("time", "horizon_steps"): "horizon_steps",
    ("time", "dt_s"): "dt",
}


def parse_document(config_text: str) -> dict:
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("top level of the config must be an object")
    return doc


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing section '{name}'")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be an object")
    return sec


def _number(sec: dict, key: str, where: str, integer: bool = False):
    val = sec[key]
    ok = isinstance(val, int) if integer else isinstance(val, (int, float))
    if isinstance(val, bool) or not ok:
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"{where}.{key} must be {kind}, got {val!r}")
    return val


def _agent_from(sec: dict, where: str) -> AgentSpec:
    unknown = set(sec) - set(_AGENT_KEYS)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, attr in _AGENT_KEYS.items():
        if key not in sec:
            if key in ("start_m", "goal_m"):
                raise ConfigError(f"{where}.{key} is required")
            continue
        if key in ("start_m", "goal_m"):
            v = sec[key]
            if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
                raise ConfigError(f"{where}.{key} must be a list of two numbers")
            kwargs[attr] = tuple(float(c) for c in v)
        else:
            kwargs[attr] = float(_number(sec, key, where))
    return AgentSpec(**kwargs)


def scenario_from_dict(doc: dict) -> Scenario:
    kwargs = {}
    for (sec_name, key), attr in _SCENARIO_KEYS.items():
        sec = _section(doc, sec_name, required=False)
        if key in sec:
            integer = attr == "horizon_steps"
            val = _number(sec, key, sec_name, integer=integer)
            kwargs[attr] = int(val) if integer else float(val)
    for sec_name in ("room", "wall", "time"):
        known = {k for (s, k) in _SCENARIO_KEYS if s == sec_name}
        unknown = set(_section(doc, sec_name, required=False)) - known
        if unknown:
            raise ConfigError(f"{sec_name}: unknown keys {sorted(unknown)}")
    kwargs["robot"] = _agent_from(_section(doc, "robot"), "robot")
    kwargs["pedestrian"] = _agent_from(_section(doc, "pedestrian"), "pedestrian")
    return validate_scenario(Scenario(**kwargs))


def scenario_to_dict(s: Scenario) -> dict:
    doc: dict = {}
    for (sec_name, key), attr in _SCENARIO_KEYS.items():
        doc.setdefault(sec_name, {})[key] = getattr(s, attr)
    for name, a in s.agents().items():
        doc[name] = {key: (list(getattr(a, attr)) if key in ("start_m", "goal_m") else getattr(a, attr))
                     for key, attr in _AGENT_KEYS.items()}
    return doc


def load_scenario(config_text: str) -> Scenario:
    """Parse and validate the scenario part of a config document."""
    return scenario_from_dict(parse_document(config_text))


def canonical_config_text() -> str:
    """Text of the bundled canonical bottleneck configuration."""
    return resources.files("prefplan.data").joinpath("canonical.json").read_text()
