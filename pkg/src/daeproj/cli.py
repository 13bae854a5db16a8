"""Command-line front end: solve problems, run convergence studies and dump
projectors.

Exit codes: 0 success, 1 numerical failure, 2 usage/configuration error.
Trajectory files are CSV (header t,x_1..x_n,residual) or JSON lines with
the same fields, printed to 17 significant digits so values round-trip.
The default output directory comes from DAEPROJ_OUTDIR (falling back to
the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .analysis import empirical_order
from .dae import consistency_residual
from .errors import DaeprojError
from .pencil import compute_projectors, estimate_index, validate_projectors
from .problems import PRESETS, get_preset, load_problem_file
from .solvers import SolverConfig, solve

USAGE_ERROR = 2
NUMERICAL_ERROR = 1


def _load_problem(spec):
    """Resolve --problem: a preset name, or a path to a problem file.

    Returns (dae, default_x0, default_t0, exact_or_None).
    """
    if os.sep in spec or os.path.isfile(spec):
        dae, x0, t0 = load_problem_file(spec)
        return dae, x0, t0, None
    preset = get_preset(spec)
    return preset.build(), preset.x0, preset.t0, preset.exact


def _out_path(name, explicit):
    if explicit:
        return explicit
    return os.path.join(os.environ.get("DAEPROJ_OUTDIR", "."), name)


def write_trajectory(traj, path, fmt="csv"):
    n = traj.x.shape[1]
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t," + ",".join(f"x_{j + 1}" for j in range(n)) + ",residual\n")
            for i in range(traj.t.size):
                row = [f"{traj.t[i]:.17g}"]
                row += [f"{v:.17g}" for v in traj.x[i]]
                row.append(f"{traj.residuals[i]:.17g}")
                fh.write(",".join(row) + "\n")
    elif fmt == "jsonlines":
        with open(path, "w", encoding="utf-8") as fh:
            for i in range(traj.t.size):
                fh.write(json.dumps({
                    "t": traj.t[i],
                    "x": list(traj.x[i]),
                    "residual": traj.residuals[i],
                }) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_trajectory(path):
    """Read a trajectory file back as (t, x, residual) arrays (either format)."""
    ts, xs, rs = [], [], []
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith("t,"):
            for line in fh:
                vals = [float(s) for s in line.split(",")]
                ts.append(vals[0])
                xs.append(vals[1:-1])
                rs.append(vals[-1])
        else:
            for line in [first] + fh.readlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                ts.append(rec["t"])
                xs.append(rec["x"])
                rs.append(rec["residual"])
    return np.array(ts), np.array(xs), np.array(rs)


def _parse_x0(text, fallback):
    if text is None:
        return fallback
    return np.array([float(s) for s in text.replace(",", " ").split()])


def cmd_solve(args):
    dae, x0_default, t0_default, _ = _load_problem(args.problem)
    t0 = args.t0 if args.t0 is not None else t0_default
    config = SolverConfig(
        method=args.method, t0=t0, T=args.T, h=args.h, diag_every=args.diag_every,
    )
    x0 = _parse_x0(args.x0, x0_default)
    traj = solve(dae, x0, config)
    path = _out_path("trajectory." + ("csv" if args.format == "csv" else "jsonl"),
                     args.output)
    write_trajectory(traj, path, args.format)
    print(f"problem   : {args.problem}")
    print(f"method    : {config.method}   h = {args.h:g}   interval [{t0:g}, {args.T:g}]")
    print(f"steps     : {traj.t.size - 1}")
    print(f"max resid : {traj.residuals.max():.3e}")
    print(f"status    : {traj.status}")
    print(f"output    : {path}")
    if not traj.completed:
        print(f"failed at mesh index {traj.failed_step}: {traj.failure}",
              file=sys.stderr)
        return NUMERICAL_ERROR
    return 0


def cmd_convergence(args):
    if args.halvings < 2:
        print("need --halvings >= 2", file=sys.stderr)
        return USAGE_ERROR
    dae, x0_default, t0_default, exact = _load_problem(args.problem)
    t0 = args.t0 if args.t0 is not None else t0_default
    config = SolverConfig(method=args.method, t0=t0, T=args.T, h=args.h)
    x0 = _parse_x0(args.x0, x0_default)
    if exact is not None and not args.fine_grid:
        reference = {"exact": exact}
    else:
        reference = {"fine_grid": args.fine_grid or 16}
    report = empirical_order(dae, x0, config, args.halvings, reference)
    text = report.to_text()
    path = _out_path("order_report.txt", args.output)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    print(f"output    : {path}")
    return 0


def cmd_projectors(args):
    dae, _, t0_default, _ = _load_problem(args.problem)
    t = args.t if args.t is not None else t0_default
    nu = estimate_index(dae.pencil, t)
    ps = compute_projectors(dae.pencil, t, with_derivative=False)
    report = validate_projectors(ps, dae.pencil)
    with np.printoptions(precision=12, suppress=False):
        for name in ("P1", "P2", "Q1", "Q2", "G", "G_inv"):
            print(f"{name} =")
            print(getattr(ps, name))
    print(f"detected index     : {nu}")
    print(f"algebraic dimension: {report.d}")
    print(f"identity defect    : {report.defect:.3e}")
    for key, val in report.violations.items():
        print(f"  {key:<18}: {val:.3e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="daeproj",
        description="solve time-varying semilinear DAEs with spectral-projector "
                    "combined methods",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True,
                        help="preset name (e.g. circuit2:table1) or problem file path")
    common.add_argument("--x0", help="initial guess, comma or space separated")
    common.add_argument("--t0", type=float, help="start time (preset default otherwise)")
    common.add_argument("--output", help="output file path")

    ps = sub.add_parser("solve", parents=[common], help="integrate and write the trajectory")
    ps.add_argument("--method", type=int, choices=(1, 2), default=1)
    ps.add_argument("--h", type=float, required=True, help="uniform step size")
    ps.add_argument("--T", type=float, required=True, help="end time")
    ps.add_argument("--format", choices=("csv", "jsonlines"), default="csv")
    ps.add_argument("--diag-every", type=int, default=0,
                    help="record solvability diagnostics every K steps (0 = off)")
    ps.set_defaults(fn=cmd_solve)

    pc = sub.add_parser("convergence", parents=[common],
                        help="measure the empirical convergence order")
    pc.add_argument("--method", type=int, choices=(1, 2), default=2)
    pc.add_argument("--h", type=float, required=True, help="coarsest step size")
    pc.add_argument("--T", type=float, required=True)
    pc.add_argument("--halvings", type=int, required=True)
    pc.add_argument("--fine-grid", type=int, default=0,
                    help="compare against a run at (finest h)/FACTOR instead of "
                         "the preset's exact solution")
    pc.set_defaults(fn=cmd_convergence)

    pp = sub.add_parser("projectors", parents=[common],
                        help="print the spectral projectors at one time")
    pp.add_argument("--t", type=float, help="evaluation time (preset t0 otherwise)")
    pp.set_defaults(fn=cmd_projectors)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except DaeprojError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


def entry():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
