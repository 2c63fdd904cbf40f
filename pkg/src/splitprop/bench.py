"""The two benchmark recipes, emitting deterministic CSV rows.

Cost accounting is in H-applies on complex vectors: a degree-m
polynomial scheme costs m, an n-step m-stage splitting run costs n*m.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import baselines, propagate as prop
from .methods import SplittingMethod
from .operators import (DISCRETE, EUCLIDEAN, fourier_hamiltonian,
                        gaussian_state, h_power_norm, poschl_teller_bound_states,
                        poschl_teller_grid, tridiagonal_operator, vector_norm)

DEFAULT_SEED = 42


def _threads():
    try:
        return max(1, int(os.environ.get("SPLITPROP_THREADS", "1")))
    except ValueError:
        return 1


def random_unit_state(n, seed=DEFAULT_SEED):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------------------
# tridiagonal comparison
# ---------------------------------------------------------------------------

def tridiag_reference(omega, n, v, t=1.0):
    """exp(-i t A) v via the analytic sine eigenbasis of tridiag(-1,2,-1)."""
    k = np.arange(1, n + 1)
    lam = omega * (1.0 - np.cos(k * np.pi / (n + 1)))
    # DST-I, orthonormalized
    j = np.arange(1, n + 1)
    modes = np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, k) * np.pi / (n + 1))
    return modes @ (np.exp(-1j * t * lam) * (modes.T @ v))


def run_tridiag_bench(omegas, n, schemes, t=1.0, m_max=60, seed=DEFAULT_SEED):
    """Error-versus-cost rows for Chebyshev, Lanczos, and splitting methods.

    Returns a list of dicts with keys scheme, omega, m, h_applies, error.
    Splitting methods are applied to the spectrum-centered operator
    A - omega*I with the phase restored afterwards, like the Chebyshev
    expansion's midpoint shift.
    """
    v = random_unit_state(n, seed)
    split_methods = [s for s in schemes if isinstance(s, SplittingMethod)]
    named = [s for s in schemes if not isinstance(s, SplittingMethod)]
    unknown = [s for s in named if s not in ("chebyshev", "lanczos")]
    if unknown:
        raise ValueError(f"unknown baseline schemes: {unknown}")

    def one_omega(omega):
        rows = []
        op = tridiagonal_operator(omega, n)
        ref = tridiag_reference(omega, n, v, t)
        degrees = range(1, m_max + 1)
        if "chebyshev" in named:
            for m in degrees:
                u = baselines.chebyshev_expm(op, v, t, m, interval=(0.0, 2.0 * omega))
                rows.append(dict(scheme="chebyshev", omega=omega, m=m,
                                 h_applies=m, error=float(np.linalg.norm(u - ref))))
        if "lanczos" in named:
            for m in degrees:
                u = baselines.lanczos_expm(op, v, t, m)
                rows.append(dict(scheme="lanczos", omega=omega, m=m,
                                 h_applies=m, error=float(np.linalg.norm(u - ref))))
        for meth in split_methods:
            shifted = op.shifted(omega)
            shifted._rho = 1.01 * omega    # spectrum of A - wI is [-w, w]
            run = prop.propagate(meth, shifted, v, t,
                                 theta_prime=meth.theta_prime)
            u = np.exp(-1j * omega * t) * run.u_final
            rows.append(dict(scheme=meth.name, omega=omega, m=meth.m,
                             h_applies=run.n_steps * meth.m,
                             error=float(np.linalg.norm(u - ref))))
        return rows

    omegas = list(omegas)
    n_workers = min(_threads(), len(omegas))
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            chunks = list(pool.map(one_omega, omegas))
    else:
        chunks = [one_omega(w) for w in omegas]
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------------------
# Poschl-Teller experiment
# ---------------------------------------------------------------------------

PT_PERIOD = 333.0


def steps_per_period(method: SplittingMethod, rho, theta_prime=None,
                     period=PT_PERIOD):
    tp = method.theta_prime if theta_prime is None else theta_prime
    return math.ceil(period * rho / (method.m * tp))


def run_poschl_teller_bench(n_grid, method: SplittingMethod, periods=1,
                            b=3.0, k_bound=None, theta_prime=None):
    """Time-integration errors at dyadic multiples of the period T = 333.

    Returns (summary dict, rows).  Rows carry both norm conventions of
    the error against the same-grid reference, the a-priori bound, and
    the conservation diagnostics.
    """
    grid = poschl_teller_grid(n_grid)
    op = fourier_hamiltonian(grid)
    rho = op.rho_estimate
    u0 = gaussian_state(grid, b=b)
    if k_bound is None:
        k_bound = min(method.r, 6) if method.r > 0 else 0
    summary = {
        "N": n_grid,
        "rho": rho,
        "norm_k1": h_power_norm(op, u0, 1, DISCRETE),
        "norm_k6": h_power_norm(op, u0, 6, DISCRETE),
        "norm_k7": h_power_norm(op, u0, 7, DISCRETE),
        "bound_states": int(poschl_teller_bound_states(
            grid.mu, 2.0, 24.5).size),
        "steps_per_period": steps_per_period(method, rho, theta_prime),
        "method": method.name,
        "k_bound": k_bound,
    }
    t_end = periods * PT_PERIOD
    times = sorted({PT_PERIOD * 2 ** i for i in
                    range(int(math.log2(periods)) + 1)
                    if PT_PERIOD * 2 ** i <= t_end} | {t_end})
    run = prop.propagate(method, op, u0, t_end,
                         theta_prime=theta_prime, checkpoint_times=times)
    bound = prop.apriori_bound(method, op, u0, k_bound,
                               theta=run.tau * rho)
    dense_w, dense_v = np.linalg.eigh(op.to_dense())
    rows = []
    for (tc, u), diag in zip(run.checkpoints, run.diagnostics):
        if tc == 0.0:
            continue
        ref = dense_v @ (np.exp(-1j * tc * dense_w) * (dense_v.conj().T @ u0))
        err_e = float(np.linalg.norm(u - ref))
        err_d = float(vector_norm(u - ref, DISCRETE))
        rows.append(dict(t=tc, error_vs_reference=err_e, bound=bound.bound(tc),
                         norm=diag["norm"], energy=diag["energy"],
                         error_discrete=err_d,
                         transformed_norm=diag.get("transformed_norm",
                                                   float("nan"))))
    summary["h_applies"] = run.n_steps * method.m
    summary["n_steps"] = run.n_steps
    return summary, rows


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def rows_to_csv(rows, columns):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _csv_cell(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        if math.isnan(v):
            return "nan"
        return f"{v:.17g}"
    return str(v)
