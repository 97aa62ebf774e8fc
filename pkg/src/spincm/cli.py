"""Command-line front end: a thin client over the orchestration layer.

Subcommands mirror the service endpoints: simulate, solve-exact, compare,
verify.  Exit codes: 0 success/pass, 1 validation error, 2 numerical
failure or horizon truncation, 3 verification/comparison failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import pydantic

from . import runs, verify
from .config import RunConfig, VerifyConfig
from .errors import SpincmError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_VERIFICATION = 3


class _Parser(argparse.ArgumentParser):
    """Routes usage errors through the validation exit code."""

    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="spincm",
        description="Hyperbolic spin Calogero-Moser / spin Toda engine",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_common(p, needs_config=True):
        p.add_argument("--config", required=needs_config, help="path to a RunConfig JSON document")
        p.add_argument("--output", default=None, help="output file path (default: from config, else stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tolerance", type=float, default=None)

    add_common(sub.add_parser("simulate", help="integrate with the RK4 oracle"))
    add_common(sub.add_parser("solve-exact", help="solve by group factorization"))
    add_common(sub.add_parser("compare", help="run both methods and report deviations"))
    pv = sub.add_parser("verify", help="run a randomized verification suite")
    pv.add_argument("suite", choices=("mdybe", "algebroid", "poisson-axioms",
                                      "lax", "scaling", "reduction"))
    pv.add_argument("--config", default=None, help="optional VerifyConfig JSON document")
    pv.add_argument("--output", default=None)
    pv.add_argument("--rank", type=int, default=None)
    pv.add_argument("--pi-prime", default=None,
                    help="comma-separated simple-root indices (default: suite-specific)")
    pv.add_argument("--cases", type=int, default=None)
    pv.add_argument("--seed", type=int, default=None)
    pv.add_argument("--tolerance", type=float, default=None)
    return parser


def load_run_config(args) -> RunConfig:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as err:
        raise ValidationError(f"config: {err}")
    try:
        cfg = RunConfig.model_validate(raw)
    except pydantic.ValidationError as err:
        raise ValidationError(str(err))
    merged = cfg.model_dump()
    if args.seed is not None:
        merged["seed"] = args.seed
    if args.tolerance is not None:
        merged["tolerance"] = args.tolerance
    if args.output is not None:
        merged["output"]["path"] = args.output
    if args.format is not None:
        merged["output"]["format"] = args.format
    if args.command == "compare":
        merged["method"] = "both"
    return RunConfig.model_validate(merged)


def emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_trajectory(args, runner) -> int:
    cfg = load_run_config(args)
    result = runner(cfg)
    emit(runs.render_output(result, cfg.output.format), cfg.output.path)
    if result.status == "truncated":
        sys.stderr.write(
            f"run truncated at t = {result.horizon}: {result.failure}\n")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    return _run_trajectory(args, runs.run_simulate)


def cmd_solve_exact(args) -> int:
    return _run_trajectory(args, runs.run_solve_exact)


def cmd_compare(args) -> int:
    cfg = load_run_config(args)
    report = runs.run_compare(cfg)
    emit(json.dumps(report, sort_keys=True, indent=1) + "\n", cfg.output.path)
    if not report["pass"]:
        sys.stderr.write(f"comparison failed: max deviation {report['max_deviation']:.3e} "
                         f"> tolerance {report['tolerance']:.1e}\n")
        return EXIT_VERIFICATION
    return EXIT_OK


def cmd_verify(args) -> int:
    raw = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ValidationError(f"config: {err}")
    raw["suite"] = args.suite
    if args.rank is not None:
        raw["algebra"] = {"series": "A", "rank": args.rank}
    if args.pi_prime is not None:
        raw["pi_prime"] = [int(s) for s in args.pi_prime.split(",") if s.strip()]
    for name in ("cases", "seed", "tolerance"):
        val = getattr(args, name)
        if val is not None:
            raw[name] = val
    try:
        vcfg = VerifyConfig.model_validate(raw)
    except pydantic.ValidationError as err:
        raise ValidationError(str(err))
    report = verify.run_verify(vcfg)
    emit(json.dumps(report, sort_keys=True, indent=1) + "\n", args.output)
    return EXIT_OK if report["pass"] else EXIT_VERIFICATION


def main(argv=None) -> int:
    handlers = {
        "simulate": cmd_simulate,
        "solve-exact": cmd_solve_exact,
        "compare": cmd_compare,
        "verify": cmd_verify,
    }
    try:
        args = build_parser().parse_args(argv)
        return handlers[args.command](args)
    except ValidationError as err:
        sys.stderr.write(f"validation error: {err}\n")
        return EXIT_VALIDATION
    except SpincmError as err:
        sys.stderr.write(f"numerical failure: {type(err).__name__}: {err}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
