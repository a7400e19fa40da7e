"""Command-line entry point: ``srlasso {solve,check,sensitivity,experiment}``.

Every subcommand writes exactly one JSON report (to ``--output`` or standard
output), except ``experiment`` which writes its CSV/SVG set plus a report
into the output directory.  Exit codes:

====  ==========================================================
0     success (for ``check``: the weak condition holds)
1     computational error (report has ``status: "error"``)
2     usage error: bad flags, missing or malformed input files
3     indeterminate regularity result
4     the weak condition is false (``check``)
5     the solver did not reach the duality-gap target
====  ==========================================================
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict, replace
from typing import Optional, Sequence

import numpy as np

from . import __version__, io
from .errors import InvalidConfig, SrLassoError
from .regularity import check_regularity
from .sensitivity import sensitivity_report
from .solvers import ProblemInstance, SolverSettings, solve_lasso, solve_srlasso

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_INDETERMINATE, EXIT_FALSE, EXIT_NOT_CONVERGED = range(6)

log = logging.getLogger("srlasso")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}")
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
        return v
    return conv


def _add_instance(p: argparse.ArgumentParser, program: bool = False):
    p.add_argument("--matrix", required=True, metavar="A.csv",
                   help="measurement matrix, headerless CSV, one row per line")
    p.add_argument("--rhs", required=True, metavar="b.csv",
                   help="right-hand side, one row or one column of CSV")
    p.add_argument("--lambda", dest="lam", required=True, type=_positive(float),
                   help="tuning parameter (positive)")
    p.add_argument("--gap-tol", type=_positive(float), default=SolverSettings.gap_tol,
                   help="duality-gap target (default %(default)g)")
    p.add_argument("--max-iter", type=_positive(int), default=SolverSettings.max_iter,
                   help="iteration cap of the first-order solver (default %(default)d)")
    p.add_argument("--step-ratio", type=_positive(float), default=SolverSettings.step_ratio,
                   help="primal/dual step-size ratio (default %(default)g)")
    p.add_argument("--one-based", action="store_true",
                   help="report column indices starting at 1 instead of 0")
    p.add_argument("-o", "--output", metavar="PATH",
                   help="write the JSON report here (atomically) instead of standard output")
    if program:
        p.add_argument("--program", choices=("SR", "UC"), default="SR",
                       help="SR: square-root LASSO (default); UC: LASSO with squared fidelity")


def build_parser() -> argparse.ArgumentParser:
    from .experiments.config import EXPERIMENTS, PROFILES

    parser = _Parser(prog="srlasso",
                     description="Square-root LASSO solver, uniqueness checks, sensitivity "
                                 "analysis and synthetic experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more log output on standard error (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one instance and report the primal-dual pair")
    _add_instance(p, program=True)

    p = sub.add_parser("check", help="weak / intermediate / strong regularity of the solution",
                       description="Exit 0 when the weak condition holds, 4 when it fails "
                                   "and 3 when it cannot be decided.")
    _add_instance(p)
    p.add_argument("--full-zstar", action="store_true",
                   help="solve the auxiliary program to optimality instead of stopping "
                        "once the weak condition is decided")

    p = sub.add_parser("sensitivity", help="Jacobians, directional derivative and Lipschitz bounds")
    _add_instance(p)
    p.add_argument("--direction", metavar="q.csv",
                   help="perturbation direction q of the right-hand side (default: zero)")
    p.add_argument("--alpha", type=float, default=0.0,
                   help="perturbation of the tuning parameter (default 0)")
    p.add_argument("--lasso-lambda", type=_positive(float), metavar="LAM",
                   help="also solve the LASSO at this parameter and report its Lipschitz bound")
    p.add_argument("--validate", action="store_true",
                   help="cross-check the derivatives against finite differences")

    p = sub.add_parser("experiment", help="run one of the synthetic experiments",
                       description="Writes <name>.csv, <name>.svg, <name>_summary.csv and "
                                   "<name>_report.json into the output directory.  The "
                                   "environment variable SRLL_SEED (comma separated integers) "
                                   "replaces the configured seeds.")
    p.add_argument("--name", required=True, choices=EXPERIMENTS, help="experiment to run")
    p.add_argument("--config", metavar="PATH",
                   help="JSON configuration (default: the built-in one for --profile)")
    p.add_argument("--profile", choices=PROFILES, default="paper",
                   help="built-in parameter set when --config is absent: 'paper' uses "
                        "501-point grids, 'ci' 51-point grids (default %(default)s)")
    p.add_argument("--jobs", type=_positive(int), default=1,
                   help="worker processes (default 1)")
    p.add_argument("--output-dir", metavar="DIR",
                   help="override the configured output directory")
    p.add_argument("--quiet", action="store_true", help="no progress counter")
    return parser


# --- helpers -------------------------------------------------------------------


def _check_paths(*paths):
    for path in paths:
        if path is not None and not os.path.isfile(path):
            raise UsageError(f"no such file: {path}")


def _check_output(path):
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise UsageError(f"output directory does not exist: {parent}")


def _load_instance(args) -> ProblemInstance:
    _check_paths(args.matrix, args.rhs, getattr(args, "direction", None))
    _check_output(args.output)
    try:
        A = io.read_matrix_csv(args.matrix)
        b = io.read_vector_csv(args.rhs)
        return ProblemInstance(A, b, args.lam)
    except (ValueError, SrLassoError) as exc:
        raise UsageError(str(exc)) from exc


def _settings(args) -> SolverSettings:
    return SolverSettings(gap_tol=args.gap_tol, max_iter=args.max_iter,
                          step_ratio=args.step_ratio)


def _config(args, **extra) -> dict:
    cfg = {"command": args.command, "matrix": args.matrix, "rhs": args.rhs,
           "lambda": args.lam, "solver": asdict(_settings(args)), "one_based": args.one_based}
    cfg.update(extra)
    return cfg


def _emit(args, report: dict) -> None:
    text = io.dumps_json(report)
    if getattr(args, "output", None):
        io.atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)


def _shift(indices, one_based):
    return [int(i) + 1 for i in indices] if one_based else [int(i) for i in indices]


def _not_converged(args, cfg, pair) -> int:
    _emit(args, {"status": "not-converged", "config": cfg, "solution": pair.to_dict()})
    return EXIT_NOT_CONVERGED


# --- subcommands ---------------------------------------------------------------


def cmd_solve(args) -> int:
    p = _load_instance(args)
    cfg = _config(args, program=args.program)
    solve = solve_srlasso if args.program == "SR" else solve_lasso
    pair = solve(p, _settings(args))
    if not pair.converged:
        return _not_converged(args, cfg, pair)
    _emit(args, {"status": "ok", "config": cfg, **pair.to_dict()})
    return EXIT_OK


def cmd_check(args) -> int:
    p = _load_instance(args)
    cfg = _config(args, full_zstar=args.full_zstar)
    s = _settings(args)
    pair = solve_srlasso(p, s)
    if not pair.converged:
        return _not_converged(args, cfg, pair)
    pair, sets, rep = check_regularity(p, pair, s, full_solve=args.full_zstar)
    weak = rep.weak
    report = {"status": "ok" if weak is not None else "indeterminate", "config": cfg,
              "solution": pair.to_dict(), "sets": sets.to_dict(args.one_based),
              "regularity": rep.to_dict()}
    _emit(args, report)
    if weak is None:
        return EXIT_INDETERMINATE
    return EXIT_OK if weak else EXIT_FALSE


def cmd_sensitivity(args) -> int:
    p = _load_instance(args)
    q = None
    if args.direction is not None:
        try:
            q = io.read_vector_csv(args.direction)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        if q.size != p.A.shape[0]:
            raise UsageError(f"direction has {q.size} entries, expected {p.A.shape[0]}")
    cfg = _config(args, direction=args.direction, alpha=args.alpha,
                  lasso_lambda=args.lasso_lambda, validate=args.validate)
    s = _settings(args)
    pair = solve_srlasso(p, s)
    if not pair.converged:
        return _not_converged(args, cfg, pair)
    pair, sets, reg = check_regularity(p, pair, s)
    lasso_pair = None
    if args.lasso_lambda is not None:
        lasso_pair = solve_lasso(p.with_data(lam=args.lasso_lambda), s)
        if not lasso_pair.converged:
            return _not_converged(args, cfg, lasso_pair)
    rep = sensitivity_report(p, pair, sets, q, args.alpha, lasso_pair, args.lasso_lambda,
                             validate=args.validate)
    out = rep.to_dict()
    if out.get("K_set") is not None:
        out["K_set"] = _shift(out["K_set"], args.one_based)
    report = {"status": "ok", "config": cfg, "solution": pair.to_dict(),
              "sets": sets.to_dict(args.one_based),
              "regularity": {k: getattr(reg, k) for k in ("weak", "intermediate", "strong")},
              "sensitivity": out}
    _emit(args, report)
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiments import config as excfg
    from .experiments.runner import run_experiment

    try:
        if args.config is not None:
            _check_paths(args.config)
            cfg = excfg.load_config(args.config)
            if cfg.experiment != args.name:
                raise UsageError(f"--name {args.name} does not match the configuration's "
                                 f"experiment {cfg.experiment!r}")
        else:
            cfg = excfg.default_config(args.name, args.profile)
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from exc
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=args.output_dir)
    parent = os.path.dirname(os.path.abspath(cfg.output_dir))
    if not os.path.isdir(parent):
        raise UsageError(f"output directory's parent does not exist: {parent}")

    def progress(k, total, cell):
        sys.stderr.write(f"\r[{args.name}] {k}/{total} cells")
        if k == total:
            sys.stderr.write("\n")
        sys.stderr.flush()

    result = run_experiment(args.name, cfg, jobs=args.jobs,
                            progress=None if args.quiet else progress)
    print(result.files["report"])
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "sensitivity": cmd_sensitivity,
            "experiment": cmd_experiment}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line ``argv`` and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"srlasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"srlasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SrLassoError as exc:
        report = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
        if args.command != "experiment":
            _emit(args, report)
        else:
            print(io.dumps_json(report), end="", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
