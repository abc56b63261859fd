import dataclasses
import json

import pytest

from prefplan.config import Configs, canonical_configs, configs_from_dict, configs_to_dict, load_config
from prefplan.optimize import SolverConfig
from prefplan.planners import PlannerConfig
from prefplan.scenario import ConfigError, canonical_config_text


def test_canonical_document_round_trips():
    c = canonical_configs()
    assert configs_from_dict(json.loads(json.dumps(configs_to_dict(c)))) == c


def test_bundled_document_matches_defaults():
    # the bundled canonical document is the serialized default configuration
    assert canonical_configs() == Configs()
    assert canonical_config_text() == json.dumps(configs_to_dict(Configs()), indent=2) + "\n"


def test_optional_sections_take_defaults():
    doc = json.loads(canonical_config_text())
    for sec in ("safety", "planner", "solver"):
        del doc[sec]
    c = load_config(json.dumps(doc))
    assert (c.safety, c.planner, c.solver) == (Configs().safety, PlannerConfig(), SolverConfig())


def test_partial_section_overrides_one_field():
    doc = json.loads(canonical_config_text())
    doc["safety"] = {"gamma": 1.2}
    assert load_config(json.dumps(doc)).safety == dataclasses.replace(Configs().safety, gamma=1.2)


@pytest.mark.parametrize("section,key,value,message", [
    ("safety", "bogus", 1.0, "unknown keys"),
    ("solver", "max_outer_iters", 2.5, "integer"),
    ("planner", "sigma_min", "small", "number"),
    ("safety", "gamma", True, "number"),
    ("safety", "gamma", 3.0, "gamma must be below 2"),
    ("solver", "penalty_growth", 1.0, "penalty_growth"),
])
def test_invalid_sections_raise_config_error(section, key, value, message):
    doc = json.loads(canonical_config_text())
    doc[section][key] = value
    with pytest.raises(ConfigError, match=message):
        load_config(json.dumps(doc))


def test_unknown_section_rejected():
    doc = json.loads(canonical_config_text())
    doc["extras"] = {}
    with pytest.raises(ConfigError, match="unknown sections"):
        load_config(json.dumps(doc))
