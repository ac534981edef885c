"""Command-line front end: ``cryoeo run | budget | selftest``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 a heat
budget stage over its cooling power.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_scenario

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("cryoeo")


def _overrides(args) -> list[str]:
    items = list(args.set or [])
    if args.seed is not None:
        items.append(f"seed={args.seed}")
    return items


def _out_dir(args, scenario) -> Path:
    if args.out:
        return Path(args.out)
    return Path(scenario.output_dir) / scenario.experiment


def _summary(report: dict) -> str:
    keys = ("gain_recovered", "n_add", "floor_gap_db", "n_fits", "chi2_per_point")
    parts = [f"{k}={report[k]:.4g}" for k in keys if isinstance(report.get(k), (int, float))]
    if "eye" in report:
        eye = report["eye"]
        parts.append(f"errors={eye['error_count']} ber_bound={eye['ber_upper_bound']:.3e}")
    if "pump_points" in report:
        parts.append(f"pump_points={len(report['pump_points'])}")
    if "budget" in report:
        parts.append("budget=" + ("PASS" if report["budget"]["passed"] else "FAIL"))
    return " ".join(parts)


def cmd_run(args) -> int:
    from .scenario import run, write_run

    scenario = load_scenario(args.config, _overrides(args))
    result = run(scenario)
    out = write_run(result, scenario, _out_dir(args, scenario))
    log.info("%s -> %s", scenario.experiment, out)
    log.info("%s", _summary(result.report))
    if result.budget is not None and not result.budget.passed:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_budget(args) -> int:
    from .scenario import run_heat_budget, write_run

    scenario = load_scenario(args.config, _overrides(args))
    if scenario.thermal is None:
        raise ConfigError(f"{args.config}: budget needs a 'thermal' section")
    scenario = scenario.model_copy(update={"experiment": "heat_budget"})
    result = run_heat_budget(scenario)
    out = write_run(result, scenario, args.out or Path(scenario.output_dir) / "heat_budget")
    if not args.quiet:
        print(result.budget.table())
    log.info("budget written to %s", out / "budget.json")
    return EXIT_OK if result.budget.passed else EXIT_BUDGET


def cmd_selftest(args) -> int:
    from . import acceptance

    seed = acceptance.DEFAULT_SEED
    if args.config:
        scenario = load_scenario(args.config, _overrides(args))
        seed = scenario.seed
    if args.seed is not None:
        seed = args.seed
    results = acceptance.run_all(seed, report=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {failed}" if failed else ""))
    return EXIT_RUNTIME if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="run directory (default: <output_dir>/<experiment>)")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a scalar config leaf, e.g. modulator.v_pi=0.05")
    common.add_argument("--quiet", action="store_true", help="only report errors")

    p = argparse.ArgumentParser(prog="cryoeo", description="Cryogenic electro-optic readout simulator")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, need_cfg, text in (
        ("run", cmd_run, True, "run the experiment a scenario config describes"),
        ("budget", cmd_budget, True, "check the heat budget of a scenario's thermal section"),
        ("selftest", cmd_selftest, False, "run the embedded acceptance suite"),
    ):
        sp = sub.add_parser(name, parents=[common], help=text, description=text)
        sp.add_argument("--config", required=need_cfg, help="scenario YAML file")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
