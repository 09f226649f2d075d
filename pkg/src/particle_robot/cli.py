"""Command-line entry point: ``particle-robot run|compare|optimize|swarm|batch``.

Exit status is 0 on success, 2 for invalid scenarios, 3 when a simulation diverges
or a mode precondition fails.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import runner
from .dynamics import SimulationError
from .gait import GaitError, ModeError
from .scenario import ScenarioError, load_scenario

EXIT_CONFIG = 2
EXIT_SIMULATION = 3


def _load(path, args, kind=None):
    scenario = load_scenario(path)
    if args.seed is not None or args.dt is not None:
        scenario = scenario.with_overrides(args.seed, args.dt)
    if kind is not None and scenario.kind != kind:
        raise ScenarioError(f"{path}: expected a '{kind}' scenario, got '{scenario.kind}'")
    return scenario


def _print(data) -> None:
    print(json.dumps(data, indent=2, sort_keys=True))


def _summary(result) -> dict:
    data = runner.asdict(result.summary)
    data.update(result.extra)
    return data


def cmd_run(args):
    result = runner.run(_load(args.scenario, args), args.out)
    _print(_summary(result))


def cmd_swarm(args):
    result = runner.run(_load(args.scenario, args, "swarm"), args.out)
    _print(_summary(result))


def cmd_optimize(args):
    scenario = _load(args.scenario, args)
    if scenario.kind == "swarm" or scenario.config.mode.kind == "roll":
        raise ScenarioError(f"{args.scenario}: optimize needs a walk or hybrid mode")
    result = runner.run_optimize(scenario, args.out, args.budget)
    _print(_summary(result))


def cmd_compare(args):
    a = _load(args.a, args)
    b = _load(args.b, args)
    _print(runner.compare(a, b, args.out))


def cmd_batch(args):
    _print(runner.batch(args.scenarios, args.out, args.workers, args.seed, args.dt))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--dt", type=float, default=None, metavar="MS",
                        help="override the time step in milliseconds")

    parser = argparse.ArgumentParser(prog="particle-robot",
                                     description="Spined spherical robot simulator.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run a scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("compare", parents=[common], help="run two scenarios with the same seed")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("optimize", parents=[common], help="optimize a gait pattern")
    p.add_argument("scenario")
    p.add_argument("--budget", type=int, default=None, help="number of simulations")
    p.set_defaults(func=cmd_optimize)
    p = sub.add_parser("swarm", parents=[common], help="run a swarm scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_swarm)
    p = sub.add_parser("batch", parents=[common], help="run many scenarios")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "budget", None) is not None and args.budget < 1:
        print("error: --budget must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.dt is not None and not 0.0 < args.dt <= 2.0:
        print("error: --dt must lie in (0, 2] ms", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except (ScenarioError, GaitError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationError, ModeError) as err:
        print(f"simulation failed: {err}", file=sys.stderr)
        return EXIT_SIMULATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
