"""Command-line entry point: indicators, solve, sweep, verify and eig subcommands.

Every subcommand writes CSV to --csv (or stdout). Option precedence is
command-line flag, then the --config file (``key = value`` lines), then the
built-in default.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import indicators as ind
from . import schwarz
from .generators import DEFAULT_RADIUS, parse_geometry
from .geometry import DEFAULT_SPHERE_SAMPLES, GeometryError
from .grid import GridError, assemble_rhs, build_grid

log = logging.getLogger("ballschwarz")

DEFAULTS = {
    "geometry": None,
    "h": None,
    "method": "gmres-ms",
    "tol": 1e-8,
    "max_iters": 500,
    "seed": 0,
    "threads": 1,
    "csv": None,
    "lambda_grid": None,
    "mc_samples": ind.DEFAULT_MC_SAMPLES,
    "sphere_samples": DEFAULT_SPHERE_SAMPLES,
    "case": None,
    "n": None,
    "samples": 10_000,
    "no_indicators": False,
}
CASTS = {"h": float, "tol": float, "max_iters": int, "seed": int, "threads": int, "mc_samples": int,
         "sphere_samples": int, "case": int, "samples": int,
         "no_indicators": lambda s: s.strip().lower() in ("1", "true", "yes", "on")}


class UsageError(Exception):
    pass


def read_config(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment. Keys accept dashes or underscores."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file {path!r} not found")
    out = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: expected 'key = value' with key among "
                             f"{', '.join(k.replace('_', '-') for k in DEFAULTS)}")
        value = value.strip()
        try:
            out[key] = CASTS[key](value) if key in CASTS else value
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


def parse_lambda_grid(text: str) -> tuple:
    """Comma list ``0.5,1,2`` or logarithmic ``log:lo,hi,count``."""
    try:
        if text.startswith("log:"):
            lo, hi, k = text[4:].split(",")
            return tuple(float(v) for v in np.logspace(math.log10(float(lo)), math.log10(float(hi)), int(k)))
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"bad --lambda-grid {text!r}: use 'a,b,c' or 'log:lo,hi,count'") from None


def parse_int_list(text: str, flag: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad {flag} {text!r}: expected comma-separated integers") from None
    if not vals or min(vals) < 1:
        raise UsageError(f"{flag} needs positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--geometry", help="xyzr file or generator spec (lattice:nx,ny,nz[,r] / chain:M[,spacing[,r]])")
    common.add_argument("--h", type=float, help="grid spacing (default r_min/6)")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker threads (computations here are single-threaded)")
    common.add_argument("--csv", help="output path (default stdout)")
    common.add_argument("--sphere-samples", type=int, dest="sphere_samples")
    common.add_argument("--config", help="file of 'key = value' defaults")
    common.add_argument("-v", "--verbose", action="store_true")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--method", choices=schwarz.METHODS)
    solver.add_argument("--tol", type=float)
    solver.add_argument("--max-iters", type=int, dest="max_iters")

    indic = argparse.ArgumentParser(add_help=False)
    indic.add_argument("--lambda-grid", dest="lambda_grid", help="'a,b,c' or 'log:lo,hi,count'")
    indic.add_argument("--mc-samples", type=int, dest="mc_samples")

    p = argparse.ArgumentParser(prog="ballschwarz", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("indicators", parents=[common, indic], help="geometry indicators, d_F and bound constants")
    sub.add_parser("solve", parents=[common, solver], help="solve the Poisson problem with a Schwarz method")
    sw = sub.add_parser("sweep", parents=[common, solver, indic], help="iteration scaling over lattice sizes")
    sw.add_argument("--case", type=int, choices=(1, 2, 3))
    sw.add_argument("--n", help="comma-separated lattice sizes")
    sw.add_argument("--no-indicators", action="store_true", default=None, dest="no_indicators",
                    help="skip d_F, N_0 and s0 columns")
    vf = sub.add_parser("verify", parents=[common], help="partition-of-unity and overlap inequality checks")
    vf.add_argument("--samples", type=int)
    sub.add_parser("eig", parents=[common, indic], help="smallest Laplacian eigenvalue against its lower bound")
    return p


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        opts.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    if opts["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    if opts["h"] is not None and not opts["h"] > 0:
        raise UsageError("--h must be positive")
    if not 0 < opts["tol"] < 1:
        raise UsageError("--tol must lie in (0, 1)")
    if opts["method"] not in schwarz.METHODS:
        raise UsageError(f"unknown method {opts['method']!r}; choose from {', '.join(schwarz.METHODS)}")
    return opts


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return "" if v is None else str(v)


def write_csv(rows: list[dict], columns, dest) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    if dest:
        Path(dest).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _union(opts):
    if not opts["geometry"]:
        raise UsageError("--geometry is required")
    return parse_geometry(opts["geometry"], opts["sphere_samples"])


def _indicator_config(opts, h) -> ind.IndicatorConfig:
    grid = parse_lambda_grid(opts["lambda_grid"]) if opts["lambda_grid"] else ind.DEFAULT_LAMBDA_GRID
    try:
        return ind.IndicatorConfig(h=h, lambda_grid=grid, mc_samples=opts["mc_samples"], seed=opts["seed"])
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_indicators(opts) -> int:
    union = _union(opts)
    rep = ind.compute_indicators(union, _indicator_config(opts, opts["h"]))
    write_csv([rep.as_row()], ind.IndicatorReport.columns(), opts["csv"])
    return 0


def cmd_solve(opts) -> int:
    union = _union(opts)
    grid = build_grid(union, opts["h"])
    cfg = schwarz.SchwarzConfig(opts["method"], opts["tol"], opts["max_iters"], opts["seed"])
    rep = schwarz.solve(grid, union, assemble_rhs(grid), cfg)
    log.info("solve wall time %.2fs", rep.wall_time)
    hist = rep.residual_history
    row = {"geometry": opts["geometry"], "M": union.M, "dofs": grid.n_dofs, "method": rep.method, "h": grid.h,
           "tol": cfg.tol, "iterations": rep.iterations, "converged": rep.converged,
           "rel_residual": hist[-1] / hist[0] if hist[0] else 0.0, "coarse_dim": rep.coarse_dim,
           "breakdown": rep.breakdown or ""}
    write_csv([row], list(row), opts["csv"])
    return 0


def cmd_sweep(opts) -> int:
    if opts["case"] is None or opts["n"] is None:
        raise UsageError("sweep needs --case and --n")
    n_list = parse_int_list(str(opts["n"]), "--n")
    cfg = None if opts["no_indicators"] else _indicator_config(opts, opts["h"])
    rows = dg.scaling_sweep(opts["case"], n_list, opts["method"], opts["tol"], opts["h"], DEFAULT_RADIUS, cfg,
                            not opts["no_indicators"], opts["max_iters"], opts["seed"])
    write_csv(rows, dg.SWEEP_COLUMNS, opts["csv"])
    if opts["case"] == 3 and len(rows) > 1:
        log.info("log-log slope of iterations vs M: %.4f",
                 dg.loglog_slope([r["M"] for r in rows], [r["iterations"] for r in rows]))
    return 0


def cmd_verify(opts) -> int:
    union = _union(opts)
    beta = ind.beta_inf(union)
    gi = ind.gamma_int(union)
    gb = ind.gamma_b(beta, union.r_min, union.r_max)
    n0 = ind.n_0(union, opts["h"])
    checks = dg.verify_pou(union, opts["samples"], opts["seed"], n0, gi, gb).checks
    checks += dg.verify_overlap_inequalities(union, opts["samples"], opts["seed"], gi, gb, beta).checks
    rows = [{"check": c.name, "passed": c.passed, "worst": c.worst, "detail": c.detail} for c in checks]
    write_csv(rows, ["check", "passed", "worst", "detail"], opts["csv"])
    return 0 if all(c.passed for c in checks) else 1


def cmd_eig(opts) -> int:
    union = _union(opts)
    grid = build_grid(union, opts["h"])
    cfg = _indicator_config(opts, grid.h)
    fat = ind.d_F(union, grid.h, cfg.lambda_grid)
    chk = dg.verify_eigen_bound(grid, fat.d_F, opts["seed"])
    row = {"geometry": opts["geometry"], "h": grid.h, "d_F": fat.d_F, "lambda_min": chk.lambda_min,
           "lower_bound": chk.lower_bound, "slack": chk.slack, "passed": chk.passed}
    write_csv([row], list(row), opts["csv"])
    return 0 if chk.passed else 1


COMMANDS = {"indicators": cmd_indicators, "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify,
            "eig": cmd_eig}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (UsageError, GeometryError, GridError, ind.ResourceError, FileNotFoundError, ValueError) as e:
        print(f"ballschwarz {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
