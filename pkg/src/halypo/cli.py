"""Command line entry point: run, sweep, plot, validate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError
from .harness.config import load_config
from .harness.experiment import run_experiment, sweep, write_outputs
from .harness.persist import read_csv
from .harness.plot import render_plot
from .harness.validation import SUITES, validate_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("halypo")


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg)
    files = write_outputs(result, cfg, args.out)
    s = result.log.summary
    print(json.dumps({"summary": s.to_dict() if s else None, "files": files, **result.meta()}, indent=1, sort_keys=True))
    if result.log.error:
        log.error("run stopped early: %s", result.log.error)
        return EXIT_FAIL
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    table = sweep(cfg, range(args.first_seed, args.first_seed + args.seeds))
    text = json.dumps(table, indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_FAIL if table["failures"] else EXIT_OK


def cmd_plot(args) -> int:
    cols = read_csv(args.input)
    series = {}
    for name in args.series:
        if name not in cols or name == "regime":
            raise ConfigError(f"no numeric column {name!r} in {args.input}", "series")
        series[name] = (cols["step"], cols[name])
    render_plot(series, args.out, logy=args.logy, title=args.title or Path(args.input).stem, ylabel=", ".join(args.series))
    print(args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    report = validate_suite(args.suite, seed=args.seed)
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(text)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['suite']}.{c['name']} measured={c['measured']} tol={c['tolerance']} {c['detail']}")
    print(f"{report['n_checks'] - report['n_failed']}/{report['n_checks']} checks passed")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halypo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configured trajectory")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="repeat a run over seeds and aggregate")
    s.add_argument("--config", required=True)
    s.add_argument("--seeds", type=int, required=True, help="number of seeds")
    s.add_argument("--first-seed", type=int, default=0)
    s.add_argument("--out", help="write the summary table here as JSON")
    s.set_defaults(fn=cmd_sweep)

    pl = sub.add_parser("plot", help="plot CSV columns against step as SVG")
    pl.add_argument("--input", required=True)
    pl.add_argument("--series", required=True, action="append", help="column name; repeatable")
    pl.add_argument("--logy", action="store_true")
    pl.add_argument("--title")
    pl.add_argument("--out", required=True)
    pl.set_defaults(fn=cmd_plot)

    v = sub.add_parser("validate", help="run property checks")
    v.add_argument("--suite", required=True, choices=SUITES + ("all",))
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report", help="write the JSON report here")
    v.set_defaults(fn=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
