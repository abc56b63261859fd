"""Command-line entry point: ``prefplan <command> [options]``.

Commands write machine-readable artifacts (episode JSON, SVG figure, metrics
CSV) into ``--out`` and print human-readable summaries on standard output.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import artifacts_io as aio
from .config import Configs, load_config
from .scenario import ConfigError, canonical_config_text, validate_scenario
from .selfcheck import format_table, run_all
from .sim import PEDESTRIAN_MODELS, STRATEGIES, run_receding_horizon, run_single_shot

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2
EXIT_TIMEOUT = 3
EXIT_USAGE = 64
EXIT_CONFIG = 65

SWEEP_PARAMS = ("door_width_m", "gamma", "prior_sigma", "epsilon_overlap")

EPILOG = """exit codes:
  0   success (converged, goals reached, all checks passed)
  1   runtime error, or a failed self-check
  2   a solve did not converge (artifacts are still written)
  3   closed-loop episode timed out (freeze evidence; artifacts written)
  64  bad command-line usage
  65  configuration error (missing, unreadable or invalid scenario file)
"""

logger = logging.getLogger("prefplan")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _number_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", type=Path, default=None,
                        help="config document (JSON); defaults to the bundled canonical scenario")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (created if absent)")
    common.add_argument("--seed", type=int, default=42, help="seed for Monte Carlo oracles (default 42)")
    common.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")

    parser = _Parser(prog="prefplan", description="Bottleneck-door planning with preference distributions.",
                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                              epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add("plan", "plan one strategy once over the full horizon")
    p.add_argument("--strategy", required=True, choices=STRATEGIES)

    add("compare", "plan all three strategies on the same scenario")

    p = add("simulate", "closed-loop receding-horizon episode")
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--pedestrian", default="mirror", choices=PEDESTRIAN_MODELS)
    p.add_argument("--replan-every", type=_positive_int, default=1)

    p = add("sweep", "single-shot episodes over a list of parameter values")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, type=_number_list)
    p.add_argument("--strategy", required=True, choices=STRATEGIES)

    add("selfcheck", "closed forms against quadrature, Monte Carlo and finite differences")
    return parser


def _load(path: Path | None) -> Configs:
    if path is None:
        return load_config(canonical_config_text())
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc.strerror or exc}") from exc
    try:
        return load_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _outdir(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def _summary(ep) -> str:
    m = ep.metrics

    def f(v, fmt):
        return "none" if v is None else format(v, fmt)

    return (f"{ep.strategy}: converged={ep.converged} cross={f(m.robot_cross_step, 'd')}/"
            f"{f(m.pedestrian_cross_step, 'd')} gap={f(m.simultaneity_gap, '.2f')}s "
            f"path_ratio={m.path_ratio_robot:.3f} min_pair={m.min_pair_distance:.3f}m"
            + ("" if m.kl_total is None else f" kl={m.kl_total:.4f}"))


def _write_all(ep, configs, out: Path, stem: str):
    aio.write_episode(ep, out / f"{stem}_episode.json")
    aio.render_episode(ep, configs.scenario, out / f"{stem}.svg")


def cmd_plan(args) -> int:
    configs = _load(args.scenario)
    out = _outdir(args.out)
    ep = run_single_shot(configs.scenario, args.strategy, configs)
    _write_all(ep, configs, out, args.strategy)
    aio.write_metrics_table([ep], out / f"{args.strategy}_metrics.csv")
    print(_summary(ep))
    return EXIT_OK if ep.converged else EXIT_NOT_CONVERGED


def cmd_compare(args) -> int:
    configs = _load(args.scenario)
    out = _outdir(args.out)
    episodes = []
    failed = False
    for strategy in STRATEGIES:
        try:
            ep = run_single_shot(configs.scenario, strategy, configs)
        except Exception as exc:  # keep the other strategies' artifacts
            logger.error("%s failed: %s", strategy, exc)
            print(f"{strategy}: failed ({exc})")
            failed = True
            continue
        _write_all(ep, configs, out, strategy)
        episodes.append(ep)
        print(_summary(ep))
    if episodes:
        aio.write_metrics_table(episodes, out / "metrics.csv")
    if failed:
        return EXIT_ERROR
    return EXIT_OK if all(ep.converged for ep in episodes) else EXIT_NOT_CONVERGED


def cmd_simulate(args) -> int:
    configs = _load(args.scenario)
    out = _outdir(args.out)
    ep = run_receding_horizon(configs.scenario, args.strategy, configs, args.replan_every, args.pedestrian)
    stem = f"{args.strategy}_{args.pedestrian}"
    _write_all(ep, configs, out, stem)
    aio.write_metrics_table([ep], out / f"{stem}_metrics.csv")
    print(_summary(ep) + f" steps={len(ep.robot_executed) - 1} timed_out={ep.timed_out}")
    return EXIT_TIMEOUT if ep.timed_out else EXIT_OK


def apply_sweep_value(configs: Configs, param: str, value: float) -> Configs:
    """Copy of ``configs`` with one swept parameter replaced."""
    s = configs.scenario
    if param == "door_width_m":
        s = dataclasses.replace(s, door_width=value)
    elif param == "prior_sigma":
        s = dataclasses.replace(
            s,
            robot=dataclasses.replace(s.robot, prior_sigma=value),
            pedestrian=dataclasses.replace(s.pedestrian, prior_sigma=value),
        )
    elif param in ("gamma", "epsilon_overlap"):
        try:
            safety = dataclasses.replace(configs.safety, **{param: value})
        except ValueError as exc:
            raise ConfigError(f"{param}={value}: {exc}") from exc
        return dataclasses.replace(configs, safety=safety)
    else:
        raise ValueError(f"unknown sweep parameter {param!r}")
    try:
        s = validate_scenario(s)
    except ValueError as exc:
        raise ConfigError(f"{param}={value}: {exc}") from exc
    return dataclasses.replace(configs, scenario=s)


def cmd_sweep(args) -> int:
    configs = _load(args.scenario)
    variants = [apply_sweep_value(configs, args.param, v) for v in args.values]
    out = _outdir(args.out)
    episodes = []
    for v, c in zip(args.values, variants):
        ep = run_single_shot(c.scenario, args.strategy, c)
        episodes.append(ep)
        print(f"{args.param}={v!r} " + _summary(ep))
    extra = {"param": [args.param] * len(episodes), "value": list(args.values)}
    aio.write_metrics_table(episodes, out / f"sweep_{args.param}_{args.strategy}.csv", extra_columns=extra)
    return EXIT_OK if all(ep.converged for ep in episodes) else EXIT_NOT_CONVERGED


def cmd_selfcheck(args) -> int:
    checks = run_all(seed=args.seed)
    print(format_table(checks))
    return EXIT_OK if all(c.passed for c in checks) else EXIT_ERROR


COMMANDS = {
    "plan": cmd_plan,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"prefplan: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        logger.debug("unhandled error", exc_info=True)
        print(f"prefplan: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
