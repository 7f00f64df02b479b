"""Command line interface.

::

    ttcdr run --config experiment.cfg [--out report.csv] [--format csv|json]
    ttcdr selftest

Exit codes: 0 on success, 1 if any run failed (or a selftest check
failed), 2 on configuration errors. The environment variable
``TTCDR_SEED`` overrides the seed of the config file.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .experiment import ConfigError, emit_report, load_config, run_experiment

__all__ = ["main", "selftest"]


def _check(name, ok, detail, out):
    print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=out)
    return bool(ok)


def selftest(out=None) -> bool:
    """Quick invariant checks of every layer; returns True if all pass."""
    out = sys.stdout if out is None else out
    from .assembly import CdrAssembler, build_grid
    from .cross import maxvol
    from .problems import CdrProblem, test1
    from .reference import dense_reduced_system, full_grid_solve, relative_l2_error
    from .solve import amen_solve
    from .tt import tt_matvec, tt_random, tt_round, tt_svd

    rng = np.random.default_rng(20230067)
    ok = True

    x = rng.standard_normal((4, 5, 4, 3))
    err = np.linalg.norm(tt_svd(x, 1e-14).full() - x) / np.linalg.norm(x)
    ok &= _check("tt_svd round trip", err <= 1e-12, f"rel err {err:.1e}", out)

    t = tt_random([5, 5, 5, 5], 3, rng=1)
    y = t + t * 1e-3
    r = tt_round(y, 1e-8)
    err = np.linalg.norm(r.full() - y.full()) / np.linalg.norm(y.full())
    ok &= _check("tt_round contract", err <= 1e-8 and r.max_rank <= 3, f"rel err {err:.1e}, ranks {r.ranks}", out)

    M = rng.standard_normal((30, 4))
    idx = maxvol(M)
    coef = M @ np.linalg.inv(M[idx])
    ok &= _check("maxvol dominance", np.abs(coef).max() <= 1.0 + 1e-2 + 1e-12, f"max |coef| {np.abs(coef).max():.4f}", out)

    P = test1()
    grid = build_grid(P, 4)
    system = CdrAssembler(P, grid).system()
    A, rhs = dense_reduced_system(P, grid)
    err = np.abs(system.A.full() - A).max() / np.abs(A).max()
    ok &= _check("TT vs dense assembly (N=4)", err <= 1e-11, f"max rel diff {err:.1e}", out)

    u_tt, rep = amen_solve(system.A, system.rhs)
    u_full = full_grid_solve(P, grid)
    err = relative_l2_error(u_tt, u_full)
    ok &= _check("TT vs full solution (N=4)", err <= 1e-7 and rep.converged, f"rel diff {err:.1e}", out)

    res = np.linalg.norm(tt_matvec(system.A, u_tt).full() - system.rhs.full()) / np.linalg.norm(system.rhs.full())
    ok &= _check("solver residual", res <= 1e-9, f"{res:.1e}", out)

    Q = CdrProblem(domain=((-1, 1),) * 3, T=1.0, kappa=0.0, c=1.0, f=0.0,
                   g=lambda t, x, y, z: np.exp(-t) + 0 * x, h=1.0)
    g = build_grid(Q, 3, "backward_euler", n_time=10)
    u = full_grid_solve(Q, g)
    err = abs(u[-1].ravel()[0] - 1.1**-10)
    ok &= _check("backward Euler decay", err <= 1e-12, f"abs err {err:.1e}", out)
    return ok


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttcdr", description="Space-time CDR solver experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment described by a config file")
    run.add_argument("--config", required=True, help="flat key = value config file")
    run.add_argument("--out", help="report path (default: config 'out' or stdout)")
    run.add_argument("--format", choices=("csv", "json"), help="report format (default: config 'format' or csv)")
    sub.add_parser("selftest", help="run quick invariant checks")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "selftest":
        return 0 if selftest() else 1

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    fmt = args.format or cfg.format
    out = args.out or cfg.out
    rows = run_experiment(cfg, log=sys.stderr)
    if out:
        emit_report(rows, fmt, out)
    else:
        emit_report(rows, fmt, sys.stdout)
    return 1 if any(r.status == "failed" for r in rows) else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
