"""Command-line front end: ``saddlesor <command> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .errors import SaddleError
from .params import convergence_check, optimal
from .problem import QCase, SaddlePointSystem, build_q, stokes_problem
from .solvers import SolveOptions, solve_gmres, solve_stationary
from .spectral import MethodId, MethodParams, SpectralBounds, j_bounds, j_spectrum, schur_complement


def _g(v):
    return "%.6g" % v


def _write_csv(rows, header, out):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def cmd_generate(args, out):
    system, Q, _ = stokes_problem(args.p, args.q_case, viscosity=args.viscosity)
    system.save(args.out, Q)
    print(f"wrote {args.out}: m={system.m} n={system.n} nnz(A)={system.A.nnz} nnz(B)={system.B.nnz}",
          file=out)


def _load(directory, case):
    system = SaddlePointSystem.load(directory)
    Q, qf = build_q(system, case)
    return system, Q, qf


def cmd_spectrum(args, out):
    system, Q, qf = _load(args.input, args.q_case)
    if args.lanczos:
        b = j_bounds(system, qf)
        mu = None
    else:
        mu, b = j_spectrum(schur_complement(system), Q)
    _write_csv([[_g(b.mu_min), _g(b.mu_max)]], ["mu_min", "mu_max"], out)
    if args.full:
        if mu is None:
            raise SaddleError("--full needs the dense path (drop --lanczos)")
        print("mu", file=out)
        for v in np.sort(mu):
            print(_g(v), file=out)


def _bounds(args):
    return SpectralBounds(args.mu_min, args.mu_max, args.q_sign)


def cmd_optimal(args, out):
    res = optimal(args.method, _bounds(args), a=args.a, omega2=args.omega2)
    p = res.params
    _write_csv([[p.method.value] + [_g(v) for v in (p.tau1, p.tau2, p.omega1, p.omega2, p.a, res.rho_opt)]],
               ["method", "tau1", "tau2", "omega1", "omega2", "a", "rho_opt"], out)
    for note in res.notes:
        print(f"# {note}", file=out)


def _params_from(args):
    given = {k: getattr(args, k) for k in ("tau1", "tau2", "omega1", "omega2", "a")}
    return MethodParams.make(args.method, **{k: v for k, v in given.items() if v is not None})


def cmd_check(args, out):
    params = _params_from(args)
    verdict = convergence_check(params, _bounds(args), margin=args.margin, uncorrected_gmpsd=args.uncorrected_gmpsd)
    print(verdict.verdict.value + (f" ({verdict.case})" if verdict.case else ""), file=out)
    for v in verdict.violations:
        print(f"  {v}", file=out)


def cmd_solve(args, out):
    system, Q, qf = _load(args.input, args.q_case)
    opts = SolveOptions(tol=args.tol, max_iter=args.max_iter, record_history=bool(args.history))
    if args.method in bench_mod.BASELINES:
        res = solve_gmres(system, opts, restart=args.restart,
                          preconditioner=args.q_case if args.method == "pgmres" else None)
        params = None
    else:
        if args.params:
            vals = [float(t) for t in args.params.split(",")]
            if len(vals) not in (4, 5):
                raise SaddleError("--params takes tau1,tau2,omega1,omega2[,a]")
            params = MethodParams(*vals, method=MethodId.parse(args.method))
        else:
            mu, b = j_spectrum(schur_complement(system), Q)
            params = optimal(args.method, b, a=args.a, omega2=args.omega2).params
        res = solve_stationary(system, qf, params, opts)
    header = ["method", "iterations", "converged", "final_res", "wall_seconds"]
    row = [res.method, res.iterations, "yes" if res.converged else "no", _g(res.final_res), _g(res.wall_seconds)]
    if params is not None:
        header += ["tau1", "tau2", "omega1", "omega2", "a"]
        row += [_g(v) for v in (params.tau1, params.tau2, params.omega1, params.omega2, params.a)]
    _write_csv([row], header, out)
    if args.history:
        with open(args.history, "w") as fh:
            _write_csv([[k, repr(float(r))] for k, r in enumerate(res.res_history)], ["iteration", "res"], fh)
    return 0 if res.converged else 1


def cmd_bench(args, out):
    cfg = bench_mod.parse_config(Path(args.config).read_text())
    report = bench_mod.run_bench(cfg)
    text = bench_mod.emit_report(report, args.format)
    target = args.out or cfg.output
    if target:
        Path(target).write_text(text)
    else:
        out.write(text)
    for row in report.errored:
        print(f"row p={row.p} case={row.case} method={row.method}: {row.error}", file=sys.stderr)
    return 0 if report.ok else 1


def _add_bounds(sp):
    sp.add_argument("--mu-min", type=float, required=True)
    sp.add_argument("--mu-max", type=float, required=True)
    sp.add_argument("--q-sign", default="pos", choices=["pos", "neg"])


def build_parser():
    ap = argparse.ArgumentParser(prog="saddlesor", description="Stationary and Krylov solvers for "
                                 "saddle-point systems with closed-form optimal parameters.")
    sub = ap.add_subparsers(dest="command", required=True)
    cases = [c.value for c in QCase]

    sp = sub.add_parser("generate", help="write the Stokes test problem as Matrix Market files")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--q-case", default="tridiag", choices=cases)
    sp.add_argument("--viscosity", type=float, default=1.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("spectrum", help="extreme eigenvalues of Q^{-1} B^T A^{-1} B")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--q-case", default="tridiag", choices=cases)
    sp.add_argument("--full", action="store_true", help="also list every eigenvalue")
    sp.add_argument("--lanczos", action="store_true", help="bounds only, by Lanczos")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("optimal", help="closed-form optimal parameters")
    sp.add_argument("--method", required=True)
    _add_bounds(sp)
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--omega2", type=float, default=None)
    sp.set_defaults(func=cmd_optimal)

    sp = sub.add_parser("check", help="sufficient convergence region membership")
    sp.add_argument("--method", required=True)
    _add_bounds(sp)
    for name in ("tau1", "tau2", "omega1", "omega2", "a"):
        sp.add_argument(f"--{name}", type=float, default=None)
    sp.add_argument("--margin", type=float, default=0.0)
    sp.add_argument("--uncorrected-gmpsd", action="store_true", help="use the uncorrected GMPSD table")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("solve", help="solve a stored system")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--method", required=True, type=lambda s: s.lower() if s.lower() in bench_mod.BASELINES
                    else MethodId.parse(s).value)
    sp.add_argument("--q-case", default="tridiag", choices=cases)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--params", help="tau1,tau2,omega1,omega2[,a]")
    g.add_argument("--optimal", action="store_true", help="use the closed-form optimum (default)")
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--omega2", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--max-iter", type=int, default=1200)
    sp.add_argument("--restart", type=int, default=100)
    sp.add_argument("--history", help="write the RES history as CSV")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("bench", help="run a benchmark configuration")
    sp.add_argument("--config", required=True)
    sp.add_argument("--format", default="csv", choices=["csv", "markdown"])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)
    return ap


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args, out)
    except (SaddleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
