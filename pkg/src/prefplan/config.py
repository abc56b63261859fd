"""Complete run configuration: scenario plus safety, planner and solver settings."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .optimize import SolverConfig
from .planners.common import PlannerConfig
from .safety import SafetyConfig
from .scenario import (
    ConfigError,
    Scenario,
    _section,
    canonical_config_text,
    parse_document,
    scenario_from_dict,
    scenario_to_dict,
)


@dataclass(frozen=True)
class Configs:
    scenario: Scenario = field(default_factory=Scenario)
    safety: SafetyConfig = field(default_factory=SafetyConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)


_INT_FIELDS = {"max_outer_iters", "max_inner_iters", "seed", "memory", "n_nodes"}


def _build(cls, sec: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(sec) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, val in sec.items():
        integer = key in _INT_FIELDS
        ok = isinstance(val, int) if integer else isinstance(val, (int, float))
        if isinstance(val, bool) or not ok:
            raise ConfigError(f"{where}.{key} must be {'an integer' if integer else 'a number'}, got {val!r}")
        kwargs[key] = int(val) if integer else float(val)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def configs_from_dict(doc: dict) -> Configs:
    unknown = set(doc) - {"room", "wall", "time", "robot", "pedestrian", "safety", "planner", "solver"}
    if unknown:
        raise ConfigError(f"unknown sections {sorted(unknown)}")
    return Configs(
        scenario=scenario_from_dict(doc),
        safety=_build(SafetyConfig, _section(doc, "safety", required=False), "safety"),
        planner=_build(PlannerConfig, _section(doc, "planner", required=False), "planner"),
        solver=_build(SolverConfig, _section(doc, "solver", required=False), "solver"),
    )


def configs_to_dict(c: Configs) -> dict:
    doc = scenario_to_dict(c.scenario)
    doc["safety"] = dataclasses.asdict(c.safety)
    doc["planner"] = dataclasses.asdict(c.planner)
    doc["solver"] = dataclasses.asdict(c.solver)
    return doc


def load_config(config_text: str) -> Configs:
    """Parse a config document; omitted optional sections take their defaults."""
    return configs_from_dict(parse_document(config_text))


def canonical_configs() -> Configs:
    """The bundled, calibrated bottleneck-door configuration."""
    return load_config(canonical_config_text())
