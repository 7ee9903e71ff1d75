"""Command-line entry point: ``jetvar <subcommand> ...``.

Exit status is 0 on success, 1 when a check misses its tolerance or an
iteration fails to converge, and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from .config import ProblemConfig, load_config
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateLagrangianError,
    JetvarError,
    ParseError,
    SingularityError,
    UsageError,
)
from .geometry import cubic_el_residual, cubic_lagrangian
from .identities import run_suite
from .solver import integrate_el, shoot_bvp
from .variational import (
    action_variation,
    force_along,
    momentum_along,
    momentum_coordinates,
)

__all__ = ["main", "build_parser", "format_float", "write_csv"]

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2


class CheckFailed(Exception):
    """A computed quantity missed its tolerance."""


def format_float(x: float) -> str:
    """17 significant digits: parses back to the identical double."""
    return "%.17g" % float(x)


def write_csv(handle, header: Sequence[str], rows: Iterable[Sequence[float]]) -> int:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(header)
    count = 0
    for row in rows:
        writer.writerow([format_float(v) for v in row])
        count += 1
    return count


@contextmanager
def _destination(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as handle:
            yield handle


def _emit(cfg: ProblemConfig, args, header, rows) -> None:
    path = args.output or cfg.csv_path
    buffer = io.StringIO()
    count = write_csv(buffer, header, rows)
    with _destination(path) as handle:
        handle.write(buffer.getvalue())
    if path is not None:
        print(f"wrote {count} rows to {path}", file=sys.stderr)


def _coordinate_header(dim: int, orders: int, prefix: str = "x") -> list[str]:
    return [f"{prefix}{a}_{al}" for a in range(dim) for al in range(orders)]


# -- subcommands ---------------------------------------------------------------------

def cmd_verify(args) -> int:
    results = run_suite(seed=args.seed, max_k=args.max_k, samples=args.samples)
    width = max(len(r.name) for r in results)
    print(f"{'group':<{width}}  {'cases':>5}  {'worst':>9}  {'tol':>7}  result")
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {r.cases:>5}  {r.worst:>9.2e}  {r.tolerance:>7.0e}  {status}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} groups passed (seed {args.seed}, max k {args.max_k})")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_force(args) -> int:
    cfg = _load(args)
    cfg.require("lagrangian", "curve")
    L = cfg.lagrangian
    worst = 0.0
    rows = []
    for t in cfg.grid():
        f = force_along(L, cfg.curve, float(t))
        worst = max(worst, float(np.max(np.abs(f.value))))
        rows.append([t, *f.point, *f.value])
    header = ["t", *[f"x{a}_0" for a in range(cfg.dim)], *[f"F{a}" for a in range(cfg.dim)]]
    _emit(cfg, args, header, rows)
    if args.tol is not None and worst > args.tol:
        raise CheckFailed(f"max |F| = {worst:.3e} exceeds {args.tol:.1e}")
    return EXIT_OK


def cmd_momentum(args) -> int:
    cfg = _load(args)
    cfg.require("lagrangian", "curve")
    L = cfg.lagrangian
    rows = []
    for t in cfg.grid():
        m = momentum_along(L, cfg.curve, float(t))
        rows.append([t, *m.x.ravel(), *momentum_coordinates(m).ravel()])
    header = ["t", *_coordinate_header(cfg.dim, L.k), *_coordinate_header(cfg.dim, L.k, "p")]
    _emit(cfg, args, header, rows)
    return EXIT_OK


def cmd_vary(args) -> int:
    cfg = _load(args)
    cfg.require("lagrangian", "curve", "variation")
    lhs, rhs, report = action_variation(cfg.lagrangian, cfg.curve, cfg.variation, cfg.t0, cfg.t1)
    diff = lhs - rhs
    print(f"lhs        {format_float(lhs)}")
    print(f"rhs        {format_float(rhs)}")
    print(f"bulk       {format_float(report.bulk)}")
    print(f"boundary   {format_float(report.boundary)}")
    print(f"difference {format_float(diff)}")
    print(f"panels     {report.panels}")
    scale = max(1.0, abs(lhs), abs(rhs))
    if abs(diff) / scale > args.tol:
        raise CheckFailed(f"relative gap {abs(diff) / scale:.3e} exceeds {args.tol:.1e}")
    return EXIT_OK


def _trajectory_rows(traj, k: int, residual):
    for i, t in enumerate(traj.times):
        yield [t, *traj.states[i].T.ravel(), residual(i)]


def _write_trajectory(cfg, args, traj, residual) -> None:
    header = ["t", *_coordinate_header(cfg.dim, 2 * cfg.k), "residual"]
    rows = list(_trajectory_rows(traj, cfg.k, residual))
    _emit(cfg, args, header, rows)
    worst = max(r[-1] for r in rows)
    if args.tol is not None and worst > args.tol:
        raise CheckFailed(f"max residual {worst:.3e} exceeds {args.tol:.1e}")


def cmd_integrate(args) -> int:
    cfg = _load(args)
    cfg.require("lagrangian", "initial_state")
    traj = integrate_el(cfg.lagrangian, cfg.initial_state, cfg.t0, cfg.t1, cfg.solver)
    _write_trajectory(cfg, args, traj, traj.el_residual)
    return EXIT_OK


def _boundary(cfg: ProblemConfig):
    cfg.require("boundary_start")
    if not cfg.free_final:
        cfg.require("boundary_end")
    return cfg.boundary_start, cfg.boundary_end


def cmd_bvp(args) -> int:
    cfg = _load(args)
    cfg.require("lagrangian")
    boundary = _boundary(cfg)
    traj = shoot_bvp(cfg.lagrangian, boundary, cfg.t0, cfg.t1, cfg.solver, free_final=cfg.free_final)
    _write_trajectory(cfg, args, traj, traj.el_residual)
    return EXIT_OK


def cmd_cubic(args) -> int:
    cfg = _load(args, default_k=2)
    cfg.require("metric")
    if cfg.k != 2:
        raise ConfigError(f"the cubic flow has order 2, configuration says k = {cfg.k}")
    if cfg.lagrangian is not None:
        raise ConfigError("the cubic flow builds its own Lagrangian; drop the 'lagrangian' section")
    boundary = _boundary(cfg)
    g = cfg.metric
    L = cubic_lagrangian(g)
    traj = shoot_bvp(L, boundary, cfg.t0, cfg.t1, cfg.solver, free_final=cfg.free_final)

    def residual(i):
        t = float(traj.times[i])
        return float(np.linalg.norm(cubic_el_residual(g, traj.curve_at(i), t)))

    cfg.lagrangian = L
    _write_trajectory(cfg, args, traj, residual)
    return EXIT_OK


def _load(args, default_k: int | None = None) -> ProblemConfig:
    return load_config(args.config, default_k=default_k)


# -- parser ------------------------------------------------------------------------------

COMMANDS = {
    "verify": cmd_verify,
    "force": cmd_force,
    "momentum": cmd_momentum,
    "vary": cmd_vary,
    "integrate": cmd_integrate,
    "bvp": cmd_bvp,
    "cubic": cmd_cubic,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jetvar",
        description="Jet-based higher-order variational calculus: identities, forces, momenta and solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    verify = sub.add_parser("verify", help="run the randomized identity suite")
    verify.add_argument("--seed", type=int, default=0, help="64-bit seed (default 0)")
    verify.add_argument("--max-k", type=int, default=3, help="largest order tested (default 3)")
    verify.add_argument("--samples", type=int, default=50,
                        help="random instances per (k, dim) configuration (default 50)")

    helps = {
        "force": "sample the force covector along the configured curve",
        "momentum": "sample the momentum along the configured curve",
        "vary": "compare both sides of the first-variation formula",
        "integrate": "integrate the Euler-Lagrange equation from initial data",
        "bvp": "solve the two-point boundary problem by shooting",
        "cubic": "Riemannian cubic through boundary data on the configured metric",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="JSON problem file")
        p.add_argument("--output", help="CSV path (overrides output.csv; default standard output)")
        p.add_argument("--seed", type=int, default=0,
                       help="accepted for uniformity; these commands draw no random numbers")
        default_tol = 1e-6 if name == "vary" else None
        p.add_argument("--tol", type=float, default=default_tol,
                       help="exit with status 1 when the checked quantity exceeds this")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_k", 1) < 1 or getattr(args, "samples", 1) < 1:
        parser.error("--max-k and --samples must be positive")
    try:
        return COMMANDS[args.command](args)
    except CheckFailed as exc:
        print(f"jetvar {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except ConvergenceError as exc:
        print(f"jetvar {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ConfigError, ParseError, UsageError, DegenerateLagrangianError, SingularityError) as exc:
        print(f"jetvar {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JetvarError as exc:
        print(f"jetvar {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
