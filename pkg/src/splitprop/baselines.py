"""Chebyshev and Lanczos approximations of exp(-i t H) u0.

Both build polynomial approximations with one complex H-apply per
degree, which makes their degree directly comparable to a splitting
method's per-step stage count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import jv

from .operators import HamiltonianOperator

_BESSEL_CUTOFF = 1e-18


@dataclass(frozen=True)
class ChebyshevPlan:
    """Shift/scale data mapping the spectral interval onto [-1, 1]."""
    degree: int
    lam_min: float
    lam_max: float

    @property
    def shift(self):
        return 0.5 * (self.lam_max + self.lam_min)

    @property
    def half_width(self):
        return 0.5 * (self.lam_max - self.lam_min)


def chebyshev_plan(op: HamiltonianOperator, m: int, interval=None) -> ChebyshevPlan:
    if interval is None:
        rho = op.rho_estimate
        interval = (-rho, rho)
    lo, hi = float(interval[0]), float(interval[1])
    if not hi >= lo:
        raise ValueError("empty spectral interval")
    return ChebyshevPlan(degree=int(m), lam_min=lo, lam_max=hi)


def chebyshev_expm(op: HamiltonianOperator, u0, t: float, m: int,
                   interval=None):
    """Degree-m Chebyshev expansion of exp(-i t H) u0.

    The operator is shifted to the midpoint of the spectral interval and
    scaled by its half width; expansion coefficients are the standard
    Bessel-function weights of the exponential kernel.  Spectrum outside
    the interval shows up as runaway recurrence vectors and triggers a
    warning.
    """
    if m < 0:
        raise ValueError("degree m must be >= 0")
    u0 = np.asarray(u0, dtype=complex)
    plan = chebyshev_plan(op, m, interval)
    sigma, w = plan.shift, plan.half_width
    z = t * w
    phase = np.exp(-1j * t * sigma)
    if w <= 1e-300 or z == 0.0:
        # spectral interval collapsed: H acts as sigma * I up to width w
        return phase * u0

    k = np.arange(m + 1)
    c = (2.0 - (k == 0)) * (-1j) ** k * jv(k, z)
    # superexponential tail: degrees past the cutoff contribute nothing
    keep = np.nonzero(np.abs(c) >= _BESSEL_CUTOFF)[0]
    m_eff = int(keep[-1]) if keep.size else 0

    def ht(v):
        return (op(v) - sigma * v) / w

    grow_limit = 16.0 * np.linalg.norm(u0) + 1e-300
    tk_prev = u0
    acc = c[0] * tk_prev
    if m_eff >= 1:
        tk = ht(u0)
        acc = acc + c[1] * tk
        for j in range(2, m_eff + 1):
            tk_prev, tk = tk, 2.0 * ht(tk) - tk_prev
            if np.linalg.norm(tk) > grow_limit:
                warnings.warn(
                    f"Chebyshev recurrence growing at degree {j}: spectrum "
                    f"outside [{plan.lam_min:g}, {plan.lam_max:g}]?")
                grow_limit = np.inf
            acc = acc + c[j] * tk
    return phase * acc


@dataclass
class KrylovBasis:
    """Orthonormal Lanczos vectors and the projected tridiagonal."""
    V: np.ndarray          # (n, m) orthonormal columns
    alpha: np.ndarray      # diagonal of T_m
    beta: np.ndarray       # subdiagonal of T_m (length m-1)
    breakdown: bool        # stopped early on an invariant subspace

    @property
    def m(self):
        return self.alpha.size

    def orthonormality_defect(self):
        g = self.V.conj().T @ self.V
        return float(np.max(np.abs(g - np.eye(self.m))))


def lanczos_basis(op: HamiltonianOperator, u0, m: int,
                  breakdown_tol=1e-12) -> KrylovBasis:
    """m-step Lanczos with full reorthogonalization from u0/||u0||."""
    u0 = np.asarray(u0, dtype=complex)
    nrm = np.linalg.norm(u0)
    if nrm == 0.0:
        raise ValueError("Lanczos needs a nonzero start vector")
    if not 1 <= m <= op.dim:
        raise ValueError(f"need 1 <= m <= dim = {op.dim}")
    n = op.dim
    V = np.zeros((n, m), dtype=complex)
    alpha = np.zeros(m)
    beta = np.zeros(max(m - 1, 0))
    V[:, 0] = u0 / nrm
    breakdown = False
    j = 0
    for j in range(m):
        w = op(V[:, j])
        a = np.real(np.vdot(V[:, j], w))
        alpha[j] = a
        w = w - a * V[:, j]
        if j > 0:
            w = w - beta[j - 1] * V[:, j - 1]
        # full reorthogonalization, twice for safety
        for _ in range(2):
            w = w - V[:, : j + 1] @ (V[:, : j + 1].conj().T @ w)
        if j + 1 < m:
            b = np.linalg.norm(w)
            if b <= breakdown_tol * max(1.0, abs(a)):
                breakdown = True
                break
            beta[j] = b
            V[:, j + 1] = w / b
    keep = j + 1
    return KrylovBasis(V=V[:, :keep], alpha=alpha[:keep],
                       beta=beta[: max(keep - 1, 0)], breakdown=breakdown)


def lanczos_expm(op: HamiltonianOperator, u0, t: float, m: int):
    """Krylov approximation ||u0|| V exp(-i t T_m) e1.

    Happy breakdown truncates to the invariant subspace, where the
    result is exact.  The output norm matches ||u0|| to round-off since
    both V and the small propagator are unitary.
    """
    u0 = np.asarray(u0, dtype=complex)
    nrm = np.linalg.norm(u0)
    basis = lanczos_basis(op, u0, m)
    if basis.m == 1:
        small = np.array([np.exp(-1j * t * basis.alpha[0])])
    else:
        w, W = eigh_tridiagonal(basis.alpha, basis.beta)
        small = W @ (np.exp(-1j * t * w) * W[0, :].conj())
    return nrm * (basis.V @ small)
