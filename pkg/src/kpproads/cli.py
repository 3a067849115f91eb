"""Command-line interface: every subcommand writes CSV to stdout.

Human-readable summaries go to stderr so that stdout stays machine-readable.
Exit codes: 0 success, 1 solver/runtime failure, 2 usage error.  Arguments
can also be read from a file with ``@flags.txt`` (one flag or value per line).
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dispersion import DomainError, Params, curves_csv, fmt, rho, sample_curves
from .simulate import (
    BlowUpError,
    CFLError,
    DomainTooSmallError,
    Reaction,
    SimConfig,
    run,
)
from .speed import (
    RECORD_FIELDS,
    SolverError,
    limit_c0,
    limit_cinf,
    limit_ctilde,
    r_max,
    solve_cstar,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

PARAM_NAMES = ("d", "D", "mu", "nu", "R", "N", "f0")
DEFAULTS = {"d": 1.0, "mu": 1.0, "nu": 1.0, "N": 1, "f0": 1.0}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    base: Params

    def __post_init__(self):
        if self.axis not in ("D", "R"):
            raise UsageError(f"axis must be D or R, got {self.axis!r}")
        if not self.values:
            raise UsageError("sweep needs at least one value")
        if any(not (v > 0 and math.isfinite(v)) for v in self.values):
            raise UsageError("sweep values must be finite and positive")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise UsageError("sweep values must be strictly increasing")

    def points(self) -> list[Params]:
        return [self.base.replace(**{self.axis: v}) for v in self.values]


def positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a finite positive number, got {text}")
    return v


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def parse_range(text: str) -> list[float]:
    """``start:stop:n`` (linear) or ``start:stop:n:log`` (geometric), endpoints included."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("lin", "log")):
        raise UsageError(f"range must be start:stop:n[:lin|log], got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"bad range {text!r}") from None
    if n < 1:
        raise UsageError("range needs n >= 1")
    if len(parts) == 4 and parts[3] == "log":
        if not (a > 0 and b > 0):
            raise UsageError("log range needs positive endpoints")
        return list(np.geomspace(a, b, n))
    return list(np.linspace(a, b, n))


def parse_values(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad value list {text!r}") from None


def _add_params(parser: argparse.ArgumentParser, required: Sequence[str] = (),
                defaults: Optional[dict] = None) -> None:
    defaults = {**DEFAULTS, **(defaults or {})}
    g = parser.add_argument_group("model parameters")
    for name in PARAM_NAMES:
        kind = positive_int if name == "N" else positive_float
        if name in required:
            g.add_argument(f"--{name}", type=kind, required=True, metavar="X")
        else:
            g.add_argument(f"--{name}", type=kind, default=defaults.get(name), metavar="X")


def _params(args, **override) -> Params:
    vals = {k: getattr(args, k) for k in PARAM_NAMES}
    vals.update(override)
    missing = [k for k, v in vals.items() if v is None]
    if missing:
        raise UsageError("missing parameter(s): " + ", ".join("--" + k for k in missing))
    try:
        return Params(**vals)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


# ---------------------------------------------------------------------------
# subcommands


def cmd_speed(args, out, err) -> int:
    p = _params(args)
    res = solve_cstar(p)
    rec = res.record(p)
    w = _writer(out)
    w.writerow(RECORD_FIELDS)
    w.writerow([_cell(rec[k]) for k in RECORD_FIELDS])
    print(f"c* = {res.c_star:.10g}  (c_KPP = {p.c_kpp:.10g})  type {res.type}", file=err)
    print(f"tangency at beta* = {res.beta_star:.6g}, alpha* = {res.alpha_star:.6g}", file=err)
    if p.D > 2 * p.d:
        R_M, c_M = r_max(p)
        print(f"R_M = {R_M:.10g}, c_M = {c_M:.10g}", file=err)
    return EXIT_OK


def _solve_row(p: Params):
    try:
        res = solve_cstar(p)
    except (SolverError, DomainError, ArithmeticError) as exc:
        return None, str(exc)
    return res, None


def cmd_sweep(args, out, err) -> int:
    if (args.values is None) == (args.range is None):
        raise UsageError("sweep needs exactly one of --values or --range")
    vals = parse_values(args.values) if args.values is not None else parse_range(args.range)
    placeholder = {args.axis: 1.0}
    spec = SweepSpec(args.axis, tuple(vals), _params(args, **placeholder))
    pts = spec.points()
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_solve_row, pts))  # map keeps axis order
    else:
        rows = [_solve_row(p) for p in pts]

    w = _writer(out)
    header = [spec.axis, "c_star", "beta_star", "type", "status"]
    if spec.axis == "D":
        header.insert(4, "c_tilde2_sqrtD")
        c_tilde = limit_ctilde(spec.base)
    w.writerow(header)
    failed = 0
    for v, (res, msg) in zip(spec.values, rows):
        if res is None:
            failed += 1
            print(f"{spec.axis}={v:g}: {msg}", file=err)
            row = [fmt(v), "", "", "", "error"]
        else:
            row = [fmt(v), fmt(res.c_star), fmt(res.beta_star), str(res.type), "ok"]
        if spec.axis == "D":
            row.insert(4, fmt(c_tilde * math.sqrt(v)))
        w.writerow(row)

    # footer: the applicable limits as a second CSV block
    out.write("\n")
    w.writerow(["quantity", "value"])
    base = spec.base
    w.writerow(["c_kpp", fmt(base.c_kpp)])
    if spec.axis == "D":
        w.writerow(["c0", fmt(limit_c0(base))])
        w.writerow(["c_tilde2", fmt(c_tilde)])
    else:
        w.writerow(["c_inf", fmt(limit_cinf(base))])
        if base.D > 2 * base.d:
            R_M, c_M = r_max(base)
            w.writerow(["R_M", fmt(R_M)])
            w.writerow(["c_M", fmt(c_M)])
    if failed:
        print(f"{failed} of {len(pts)} points failed", file=err)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_limits(args, out, err) -> int:
    p = _params(args)
    fields = ["c0", "c_tilde2", "c_inf"]
    vals = [limit_c0(p), limit_ctilde(p), limit_cinf(p)]
    if p.D > 2 * p.d:
        fields += ["R_M", "c_M"]
        vals += list(r_max(p))
    w = _writer(out)
    w.writerow(fields)
    w.writerow([fmt(v) for v in vals])
    return EXIT_OK


def cmd_curves(args, out, err) -> int:
    p = _params(args)
    c = args.c
    if args.values is not None and args.range is not None:
        raise UsageError("give at most one of --values or --range")
    if args.values is not None:
        grid = parse_values(args.values)
    elif args.range is not None:
        grid = parse_range(args.range)
    else:
        left = max(rho(c, p), 0.5 * p.beta_bar)
        grid = list(np.linspace(-left, p.beta_bar * (1 - 1e-9), args.n))
    try:
        samples = sample_curves(c, p, grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    curves_csv(samples, out)
    return EXIT_OK


def cmd_simulate(args, out, err) -> int:
    p = _params(args)
    try:
        cfg = SimConfig(p, L=args.L, nx=args.nx, ny=args.ny, dt=args.dt, t_end=args.t_end,
                        reaction=Reaction(args.reaction), level=args.level,
                        output_every=args.output_every)
    except CFLError as exc:
        raise UsageError(f"{exc} (CFL bound: dt <= {exc.bound:.17g})") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    trace = run(cfg)
    trace.to_csv(out)
    print(f"steps of dt = {cfg.dt:.6g} to t = {trace.times[-1]:.6g}", file=err)
    if cfg.reaction is Reaction.ZERO:
        # without reaction the scheme conserves total mass
        print(f"relative mass drift: {trace.mass_drift():.3e}", file=err)
    if not trace.has_front:
        print("no front: no column reaches the level in the fit window", file=err)
        return EXIT_OK
    c_star = solve_cstar(cfg.p).c_star
    dev = trace.speed_fit / c_star - 1
    print(f"fitted speed {trace.speed_fit:.6g} over t in [{trace.fit_window[0]:.4g}, "
          f"{trace.fit_window[1]:.4g}]; c* = {c_star:.6g}; relative deviation {dev:+.3%}",
          file=err)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kpproads",
        description="Spreading speed of Fisher-KPP fronts with fast diffusion on the boundary.",
        fromfile_prefix_chars="@",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("speed", help="c* and the tangency point for one parameter set")
    _add_params(sp, required=("D", "R"))
    sp.set_defaults(func=cmd_speed)

    sw = sub.add_parser("sweep", help="c* along a D- or R-grid, with limit speeds")
    sw.add_argument("--axis", choices=("D", "R"), required=True)
    sw.add_argument("--values", help="comma-separated, strictly increasing")
    sw.add_argument("--range", help="start:stop:n[:lin|log]")
    sw.add_argument("--jobs", type=positive_int, default=1, help="worker processes")
    _add_params(sw, defaults={"D": 1.0, "R": 1.0})
    sw.set_defaults(func=cmd_sweep)

    lm = sub.add_parser("limits", help="limit speeds c0, c_tilde2, c_inf (and R_M, c_M)")
    _add_params(lm, required=("D", "R"))
    lm.set_defaults(func=cmd_limits)

    cv = sub.add_parser("curves", help="alpha intervals of both regions on a beta grid")
    cv.add_argument("--c", type=positive_float, required=True)
    cv.add_argument("--values", help="comma-separated beta values")
    cv.add_argument("--range", help="start:stop:n beta grid")
    cv.add_argument("--n", type=positive_int, default=201, help="size of the default grid")
    _add_params(cv, required=("D", "R"))
    cv.set_defaults(func=cmd_curves)

    sm = sub.add_parser("simulate", help="finite-difference run on the strip (N = 1)")
    sm.add_argument("--L", type=positive_float, default=150.0)
    sm.add_argument("--nx", type=positive_int, default=2400)
    sm.add_argument("--ny", type=positive_int, default=40)
    sm.add_argument("--dt", type=positive_float, default=None, help="default: largest stable step")
    sm.add_argument("--t-end", type=positive_float, default=50.0)
    sm.add_argument("--output-every", type=positive_float, default=0.5)
    sm.add_argument("--reaction", choices=[r.value for r in Reaction], default="logistic")
    sm.add_argument("--level", type=float, default=0.5)
    _add_params(sm, defaults={"D": 1.0, "R": 2.0})
    sm.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=err)
    try:
        return args.func(args, out, err)
    except UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except (SolverError, DomainTooSmallError, BlowUpError, ArithmeticError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_FAILURE
    except DomainError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
