"""Command-line entry point: ``hp-lab run | list | replay``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .errors import ConfigError, HPLabError, NumericalFailure
from .experiments import (
    EXIT_FAIL,
    EXIT_NUMERICAL,
    EXIT_PASS,
    EXIT_USAGE,
    ExperimentConfig,
    list_experiments,
    replay,
    run,
)

log = logging.getLogger("hplab")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hp-lab", description="Reproducible Monte Carlo verification experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="flat key = value config file")
    p_run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p_run.add_argument("--out", help="output directory (overrides the config's out)")

    p_list = sub.add_parser("list", help="list experiments")
    p_list.add_argument("--json", action="store_true", help="machine-readable output")

    p_replay = sub.add_parser("replay", help="rerun a manifest and compare digests")
    p_replay.add_argument("manifest")
    p_replay.add_argument("--out", help="directory for the replayed outputs")
    return parser


def _cmd_run(args) -> int:
    overrides = list(args.overrides)
    if args.out:
        overrides.append(f"out={args.out}")
    if args.config is None and not any(o.startswith("experiment=") for o in overrides):
        raise ConfigError("give --config FILE or --set experiment=NAME")
    cfg = ExperimentConfig.load(args.config, overrides)
    manifest, result = run(cfg)
    for r in result.reports:
        p = "-" if r.p_value is None else f"{r.p_value:.4g}"
        print(f"{r.verdict.upper():4s}  {r.test:32s} stat={r.statistic:.6g}  p={p}  {r.label}")
    print(f"wrote {cfg.out}/ in {manifest['wall_clock_seconds']:.1f}s")
    return EXIT_PASS if result.passed else EXIT_FAIL


def _cmd_list(args) -> int:
    rows = list_experiments()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_PASS
    width = max(len(r["experiment"]) for r in rows)
    for r in rows:
        print(f"{r['experiment']:{width}s}  {r['statement']}")
        print(f"{'':{width}s}  defaults: " + ", ".join(f"{k}={v}" for k, v in r["defaults"].items()))
    return EXIT_PASS


def _cmd_replay(args) -> int:
    same, old, new = replay(args.manifest, args.out)
    for name in sorted(set(old) | set(new)):
        mark = "same" if old.get(name) == new.get(name) else "DIFF"
        print(f"{mark}  {name}")
    return EXIT_PASS if same else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "list": _cmd_list, "replay": _cmd_replay}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"hp-lab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"hp-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HPLabError as exc:
        print(f"hp-lab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
