"""Command-line front end."""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import baselines, bench, design as design_mod, polyprop
from . import propagate as prop
from .errors import SplitpropError
from .methods import resolve_method, save_method
from .operators import (DISCRETE, load_problem, tridiagonal_operator,
                        vector_norm)


def _parse_int_list(text):
    return [int(x) for x in text.split(",") if x != ""]


def _parse_float_list(text):
    return [float(x) for x in text.split(",") if x != ""]


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_analyze(args):
    method = resolve_method(args.method)
    K = prop.method_matrix(method)
    ystar = polyprop.stability_threshold(K)
    theta = args.theta
    if theta is None:
        theta = min(method.theta_prime * method.m, 0.999 * ystar)
    report = polyprop.analyze(K, theta, ks=_parse_int_list(args.k),
                              n_samples=args.samples,
                              practical=args.practical_threshold)
    _write(args.out, report.to_csv())
    print(f"method={method.name} y_star={ystar:.9g} theta={theta:g} "
          f"order_estimate={report.order_estimate}")
    for k in sorted(report.mu):
        print(f"mu_{k}={report.mu[k]:.9g} nu_{k}={report.nu[k]:.9g}")
    if report.practical_threshold is not None:
        print(f"practical_threshold={report.practical_threshold:.9g}")
    return 0


def cmd_design(args):
    target = design_mod.DesignTarget(m=args.m, r=args.r,
                                     theta_prime=args.theta_prime,
                                     lam=args.lam)
    result = design_mod.design_method(target)
    save_method(result.method, args.out)
    report_path = args.out.rsplit(".", 1)[0] + "_report.csv"
    _write(report_path, result.report.to_csv())
    print(f"designed {result.method.describe()}")
    print(f"y_star={result.report.y_star:.9g} "
          f"y_star/m={result.report.y_star / args.m:.6g} "
          f"candidates={result.n_candidates} "
          f"coeff_sum={result.coefficient_sum:.6g}")
    for k in sorted(result.report.mu):
        print(f"mu_{k}={result.report.mu[k]:.9g} "
              f"nu_{k}={result.report.nu[k]:.9g}")
    print(f"wrote {args.out} and {report_path}")
    return 0


def cmd_integrate(args):
    method = resolve_method(args.method)
    op, u0, _cfg = load_problem(args.problem)
    if u0 is None:
        u0 = bench.random_unit_state(op.dim, args.seed)
    run = prop.propagate(method, op, u0, args.t, theta_prime=args.theta_prime)
    theta = run.tau * op.rho_estimate if run.n_steps else 0.0
    bound = None
    if run.n_steps and args.k is not None:
        bound = prop.apriori_bound(method, op, u0, args.k, theta)
    rows = []
    for (tc, u), diag in zip(run.checkpoints, run.diagnostics):
        ref = prop.reference_propagate(op, u0, tc)
        rows.append(dict(
            t=tc,
            error_vs_reference=float(np.linalg.norm(u - ref)),
            bound=bound.bound(tc) if bound else math.nan,
            norm=diag["norm"],
            energy=diag["energy"],
            error_discrete=vector_norm(u - ref, DISCRETE),
            transformed_norm=diag.get("transformed_norm", math.nan),
        ))
    cols = ("t", "error_vs_reference", "bound", "norm", "energy",
            "error_discrete", "transformed_norm")
    _write(args.out, bench.rows_to_csv(rows, cols))
    print(f"integrated {method.name}: n_steps={run.n_steps} tau={run.tau:.6g} "
          f"theta={theta:.6g} h_applies={run.h_applies}")
    return 0


def cmd_baseline(args):
    op = tridiagonal_operator(args.omega, args.N)
    v = bench.random_unit_state(args.N, args.seed)
    ref = bench.tridiag_reference(args.omega, args.N, v, args.t)
    if args.scheme == "chebyshev":
        u = baselines.chebyshev_expm(op, v, args.t, args.m,
                                     interval=(0.0, 2.0 * args.omega))
    elif args.scheme == "lanczos":
        u = baselines.lanczos_expm(op, v, args.t, args.m)
    else:
        raise SplitpropError(f"unknown scheme {args.scheme!r}")
    err = float(np.linalg.norm(u - ref))
    rows = [dict(scheme=args.scheme, omega=args.omega, m=args.m,
                 h_applies=args.m, error=err)]
    _write(args.out, bench.rows_to_csv(rows, ("scheme", "omega", "m",
                                              "h_applies", "error")))
    print(f"{args.scheme} m={args.m} omega={args.omega:g} error={err:.6e}")
    return 0


def cmd_bench_tridiag(args):
    schemes = []
    for name in args.schemes.split(","):
        name = name.strip()
        if name in ("chebyshev", "lanczos"):
            schemes.append(name)
        else:
            schemes.append(resolve_method(name))
    rows = bench.run_tridiag_bench(_parse_float_list(args.omega), args.N,
                                   schemes, t=args.t, m_max=args.m_max,
                                   seed=args.seed)
    _write(args.out, bench.rows_to_csv(rows, ("scheme", "omega", "m",
                                              "h_applies", "error")))
    print(f"bench-tridiag: {len(rows)} rows")
    return 0


def cmd_bench_pt(args):
    method = resolve_method(args.method)
    summary, rows = bench.run_poschl_teller_bench(
        args.N, method, periods=args.periods, b=args.b,
        theta_prime=args.theta_prime)
    cols = ("t", "error_vs_reference", "bound", "norm", "energy",
            "error_discrete", "transformed_norm")
    _write(args.out, bench.rows_to_csv(rows, cols))
    for key in ("N", "rho", "norm_k1", "norm_k6", "norm_k7", "bound_states",
                "steps_per_period", "n_steps", "h_applies"):
        v = summary[key]
        print(f"{key}={v:.9g}" if isinstance(v, float) else f"{key}={v}")
    return 0


def cmd_spectral_radius(args):
    op, _u0, _cfg = load_problem(args.problem)
    rho = op.rho_estimate
    print(f"rho_estimate={rho:.9g}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="splitprop",
        description="Splitting-method propagators for i du/dt = H u: "
                    "analysis, design, integration, and baselines.")
    ap.add_argument("--seed", type=int, default=bench.DEFAULT_SEED,
                    help="seed for any randomized input (default 42)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="stability/error report for a method")
    p.add_argument("--method", required=True, help="builtin name or JSON path")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--k", default="0", help="comma list of error indices")
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--practical-threshold", action="store_true")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("design", help="construct a method for (m, r, theta')")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--theta-prime", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--out", required=True, help="method JSON path")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("integrate", help="propagate a problem config")
    p.add_argument("--method", required=True)
    p.add_argument("--problem", required=True, help="problem config JSON")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--theta-prime", type=float, default=None)
    p.add_argument("--k", type=int, default=None,
                   help="regularity index for the a-priori bound")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("baseline", help="single Chebyshev/Lanczos run")
    p.add_argument("--scheme", required=True, choices=("chebyshev", "lanczos"))
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--omega", type=float, default=15.0)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("bench-tridiag", help="error vs cost comparison")
    p.add_argument("--omega", default="15", help="comma list, e.g. 15,20,30,40")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--schemes", default="chebyshev,lanczos",
                   help="comma list of baselines and/or method files")
    p.add_argument("--m-max", type=int, default=60)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench_tridiag)

    p = sub.add_parser("bench-poschl-teller", help="anharmonic-well run")
    p.add_argument("--N", type=int, default=128)
    p.add_argument("--method", required=True)
    p.add_argument("--periods", type=int, default=1)
    p.add_argument("--b", type=float, default=3.0)
    p.add_argument("--theta-prime", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench_pt)

    p = sub.add_parser("spectral-radius", help="estimate rho(H) for a config")
    p.add_argument("--problem", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_spectral_radius)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (SplitpropError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
