import dataclasses
import json

import pytest

from prefplan import cli
from prefplan import gaussian as G
from prefplan.artifacts_io import read_episode, read_metrics_table
from prefplan.config import configs_to_dict
from prefplan.scenario import canonical_config_text


# ---------------------------------------------------------------------------
# usage and configuration errors

def test_unknown_strategy_is_a_usage_error(tmp_path, capsys):
    assert cli.main(["plan", "--strategy", "mpc", "--out", str(tmp_path)]) == cli.EXIT_USAGE
    assert "mpc" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["simulate", "--strategy", "ptp", "--replan-every", "0"],
    ["simulate", "--strategy", "ptp", "--replan-every", "two"],
    ["sweep", "--param", "door_width_m", "--values", "1.0,wide", "--strategy", "ptp"],
    ["sweep", "--param", "wall_height", "--values", "1.0", "--strategy", "ptp"],
    ["plan"],
    [],
])
def test_bad_usage(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv else argv) == cli.EXIT_USAGE


def test_missing_scenario_file_names_the_path(tmp_path, capsys):
    path = tmp_path / "nowhere.json"
    code = cli.main(["plan", "--strategy", "ptp", "--scenario", str(path), "--out", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
    assert str(path) in capsys.readouterr().err


@pytest.mark.parametrize("text", ["{not json", '{"wall": {"door_width_m": -1}}', '{"rooms": {}}'])
def test_invalid_scenario_file(text, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert cli.main(["plan", "--strategy", "ptp", "--scenario", str(path), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_invalid_sweep_value_is_a_config_error(tmp_path):
    argv = ["sweep", "--param", "door_width_m", "--values", "0.2", "--strategy", "ptp", "--out", str(tmp_path)]
    assert cli.main(argv) == cli.EXIT_CONFIG


def test_help_lists_exit_codes(capsys):
    assert cli.main(["--help"]) == 0
    out = capsys.readouterr().out
    for code in ("64", "65", "timed out"):
        assert code in out
    assert cli.main(["simulate", "--help"]) == 0
    assert "--replan-every" in capsys.readouterr().out


# ---------------------------------------------------------------------------
# commands

def test_plan_writes_three_artifacts(tmp_path, capsys):
    out = tmp_path / "new" / "dir"
    assert cli.main(["plan", "--strategy", "dsc", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["dsc.svg", "dsc_episode.json", "dsc_metrics.csv"]
    assert "dsc: converged=True" in capsys.readouterr().out
    ep = read_episode(out / "dsc_episode.json")
    assert ep.robot_pref is not None and ep.metrics.kl_total > 0


def test_scenario_file_is_used(tmp_path, configs):
    doc = configs_to_dict(configs)
    doc["time"]["dt_s"] = 0.5
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["plan", "--strategy", "ptp", "--scenario", str(path), "--out", str(tmp_path)]) == 0
    assert read_episode(tmp_path / "ptp_episode.json").robot_executed.dt == 0.5


def test_bundled_scenario_is_the_default(tmp_path):
    path = tmp_path / "canonical.json"
    path.write_text(canonical_config_text())
    cli.main(["plan", "--strategy", "tsc", "--out", str(tmp_path / "a")])
    cli.main(["plan", "--strategy", "tsc", "--scenario", str(path), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "tsc.svg").read_bytes() == (tmp_path / "b" / "tsc.svg").read_bytes()


def test_single_value_sweep_matches_plan(tmp_path):
    assert cli.main(["plan", "--strategy", "tsc", "--out", str(tmp_path)]) == 0
    argv = ["sweep", "--param", "door_width_m", "--values", "1.6", "--strategy", "tsc", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    (plan_row,) = read_metrics_table(tmp_path / "tsc_metrics.csv")
    (sweep_row,) = read_metrics_table(tmp_path / "sweep_door_width_m_tsc.csv")
    assert sweep_row.pop("param") == "door_width_m" and sweep_row.pop("value") == "1.6"
    assert sweep_row == plan_row


def test_door_width_sweep_gap_is_non_increasing(tmp_path, capsys):
    argv = ["sweep", "--param", "door_width_m", "--values", "1.0,1.6,2.4", "--strategy", "dsc",
            "--out", str(tmp_path)]
    code = cli.main(argv)
    # the narrowest door admits no feasible dsc plan at these settings
    assert code in (cli.EXIT_OK, cli.EXIT_NOT_CONVERGED)
    rows = read_metrics_table(tmp_path / "sweep_door_width_m_dsc.csv")
    assert [r["value"] for r in rows] == ["1.0", "1.6", "2.4"]
    gaps = [float(r["simultaneity_gap"]) for r in rows]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_compare_keeps_artifacts_when_one_strategy_fails(tmp_path, monkeypatch, canonical):
    def fake(scenario, strategy, configs=None):
        if strategy == "tsc":
            raise RuntimeError("solver exploded")
        return canonical[strategy]

    monkeypatch.setattr(cli, "run_single_shot", fake)
    assert cli.main(["compare", "--out", str(tmp_path)]) == cli.EXIT_ERROR
    names = {p.name for p in tmp_path.iterdir()}
    assert {"ptp_episode.json", "dsc_episode.json", "metrics.csv"} <= names
    assert "tsc_episode.json" not in names
    assert [r["strategy"] for r in read_metrics_table(tmp_path / "metrics.csv")] == ["ptp", "dsc"]


def test_simulate_timeout_exit_code(tmp_path, monkeypatch, closed_loop_ptp_scripted):
    timed_out = dataclasses.replace(closed_loop_ptp_scripted, timed_out=True)
    monkeypatch.setattr(cli, "run_receding_horizon", lambda *a, **k: timed_out)
    code = cli.main(["simulate", "--strategy", "ptp", "--pedestrian", "scripted", "--out", str(tmp_path)])
    assert code == cli.EXIT_TIMEOUT
    assert (tmp_path / "ptp_scripted_episode.json").exists()


def test_selfcheck_passes(capsys):
    assert cli.main(["selfcheck"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_selfcheck_detects_a_broken_closed_form(monkeypatch, capsys):
    real = G.kl_divergence
    monkeypatch.setattr(G, "kl_divergence", lambda p, q: real(p, q) * 1.01 + 1e-3)
    assert cli.main(["selfcheck"]) == cli.EXIT_ERROR
    assert "FAIL" in capsys.readouterr().out
