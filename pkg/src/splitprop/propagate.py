"""Time stepping of i du/dt = H u by symplectic splitting.

The complex state u = q + i p is advanced through shear updates
q += a_i tau (H p), p -= b_i tau (H q), ordered so that n steps multiply
each H-eigenmode by K(tau*omega)^n for the method's propagation matrix K.
Includes the exact reference propagator, conservation diagnostics, and
the a-priori error bounds built from (mu_k, nu_k, rho(H), ||u0||_k).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import polyprop
from .errors import LossOfPrecisionError, StabilityError
from .methods import SplittingMethod
from .operators import (DISCRETE, EUCLIDEAN, HamiltonianOperator,
                        h_power_norm, vector_norm)

_TRANSFORMED_DIAG_MAX_N = 512


@lru_cache(maxsize=128)
def method_matrix(method: SplittingMethod) -> polyprop.PropagationMatrix:
    return polyprop.compose_K(method)


def stability_limit(method: SplittingMethod) -> float:
    return polyprop.stability_threshold(method_matrix(method))


def _stage_ops(method: SplittingMethod):
    """Time-ordered (is_b, coeff) shear updates for one step."""
    ops = []
    a, b = method.a, method.b
    for i in reversed(range(len(a))):
        if b[i] != 0.0:
            ops.append((True, b[i]))
        if a[i] != 0.0:
            ops.append((False, a[i]))
    return ops


def step(method: SplittingMethod, op: HamiltonianOperator, tau: float,
         q, p, check_stability=True, allow_unstable=False):
    """One splitting step; returns the updated (q, p).

    The stability gate tau*rho(H) < y* is checked unless disabled;
    allow_unstable downgrades a violation to a warning (useful only for
    demonstrating resonance blow-up).
    """
    if check_stability:
        y = tau * op.rho_estimate
        ystar = stability_limit(method)
        if y >= ystar:
            if not allow_unstable:
                raise StabilityError(
                    f"tau*rho = {y:.6g} >= y* = {ystar:.6g} for {method.name}")
            warnings.warn(f"stepping outside the stability interval "
                          f"(tau*rho = {y:.6g}, y* = {ystar:.6g})")
    for is_b, c in _stage_ops(method):
        if is_b:
            p = p - (c * tau) * op(q)
        else:
            q = q + (c * tau) * op(p)
    return q, p


@dataclass
class PropagationRun:
    method: SplittingMethod
    op: HamiltonianOperator
    tau: float
    n_steps: int
    checkpoints: list = field(default_factory=list)   # (t, u) pairs
    diagnostics: list = field(default_factory=list)   # dict per checkpoint
    h_applies: int = 0

    @property
    def u_final(self):
        return self.checkpoints[-1][1]

    @property
    def stage_cost(self) -> int:
        """Cost in stages, the fair unit against polynomial degree."""
        return self.n_steps * self.method.m


def _transformed_norm(K, eigvals, V, tau, q, p):
    """Norm of the backward-error state, exactly conserved by the method."""
    y = tau * eigvals
    _, eps, gam, _, _ = polyprop.phase_amplitude(K, y)
    qh = V.T @ q
    ph = V.T @ p
    root = np.sqrt(gam)
    ut = (1.0 + 1j * eps) / root * qh + 1j * root * ph
    return float(np.linalg.norm(ut)) / math.sqrt(q.size)


def propagate(method: SplittingMethod, op: HamiltonianOperator, u0, t: float,
              theta_prime=None, n_steps=None, checkpoint_times=None,
              allow_unstable=False, transformed_diagnostics=None) -> PropagationRun:
    """Integrate to time t with the scaled-step rule n = ceil(t*rho/(m*theta')).

    Checkpoints default to the dyadic times t/2^i down to the step size,
    plus the final time.  Each checkpoint records the state, both norm
    conventions, the energy u^T H conj(u)/(2N), and (for small systems)
    the transformed-state norm whose exact conservation certifies the
    backward-error interpretation of the method.
    """
    u0 = np.asarray(u0, dtype=complex)
    if not np.all(np.isfinite(u0)):
        raise ValueError("non-finite initial state")
    if theta_prime is None:
        theta_prime = method.theta_prime
    rho = op.rho_estimate
    if t < 0:
        raise ValueError("negative integration time")
    if n_steps is None:
        n_steps = max(0, math.ceil(t * rho / (method.m * theta_prime))) if t > 0 else 0
    tau = t / n_steps if n_steps else 0.0

    run = PropagationRun(method, op, tau, n_steps)
    q = u0.real.copy()
    p = u0.imag.copy()

    K = method_matrix(method)
    if n_steps:
        y = tau * rho
        ystar = stability_limit(method)
        if y >= ystar:
            if not allow_unstable:
                raise StabilityError(
                    f"tau*rho = {y:.6g} >= y* = {ystar:.6g}; refusing to run "
                    f"{method.name} outside its stability interval")
            warnings.warn(f"running outside the stability interval "
                          f"(tau*rho = {y:.6g}, y* = {ystar:.6g})")

    if transformed_diagnostics is None:
        transformed_diagnostics = op.dim <= _TRANSFORMED_DIAG_MAX_N
    eig = None
    if transformed_diagnostics and not allow_unstable:
        w, V = np.linalg.eigh(op.to_dense())
        eig = (w, V)

    # checkpoint step indices: dyadic times t/2^i plus the final step
    if checkpoint_times is None:
        idxs = {n_steps}
        i = 1
        while n_steps // (2 ** i) >= 1:
            idxs.add(n_steps // (2 ** i))
            i += 1
    else:
        idxs = {min(n_steps, max(0, round(ct / tau))) if tau else 0
                for ct in checkpoint_times}
    idxs.add(0)
    checkpoint_steps = sorted(idxs)

    def record(step_no):
        u = q + 1j * p
        if not np.all(np.isfinite(u)):
            raise LossOfPrecisionError(
                f"non-finite state at step {step_no}", stage=step_no)
        hq = op(q)
        hp = op(p)
        diag = {
            "t": step_no * tau,
            "step": step_no,
            "norm": vector_norm(u, DISCRETE),
            "norm_euclid": vector_norm(u, EUCLIDEAN),
            "energy": float(q @ hq + p @ hp) / (2.0 * op.dim),
        }
        if eig is not None:
            diag["transformed_norm"] = _transformed_norm(
                K, eig[0], eig[1], tau, q, p)
        run.checkpoints.append((step_no * tau, u))
        run.diagnostics.append(diag)

    record(0)
    ops = _stage_ops(method)
    fuse = (method.fsal and len(method.a) >= 2
            and method.a[0] != 0.0 and method.a[-1] != 0.0)
    cp = set(checkpoint_steps)
    carry = 0.0   # A-coefficient carried over a step boundary (FSAL fusion)
    for s in range(1, n_steps + 1):
        first = True
        for j, (is_b, c) in enumerate(ops):
            if first and carry != 0.0:
                # the leading A update was already applied, merged into the
                # previous step's trailing one
                first = False
                carry = 0.0
                continue
            first = False
            coeff = c
            if (fuse and j == len(ops) - 1 and s < n_steps and s not in cp):
                coeff = c + method.a[-1]
                carry = method.a[-1]
            if is_b:
                p -= (coeff * tau) * op(q)
            else:
                q += (coeff * tau) * op(p)
            run.h_applies += 1
        if s in cp:
            record(s)
        elif not np.all(np.isfinite(q)) or not np.all(np.isfinite(p)):
            raise LossOfPrecisionError(f"non-finite state at step {s}", stage=s)
    return run


# ---------------------------------------------------------------------------
# reference propagator
# ---------------------------------------------------------------------------

def reference_propagate(op: HamiltonianOperator, u0, t: float):
    """exp(-i t H) u0 by dense eigendecomposition (N <= 4096) or a
    Krylov-free scaled-Taylor evaluation for larger systems."""
    u0 = np.asarray(u0, dtype=complex)
    if op.dim <= 4096:
        w, V = np.linalg.eigh(op.to_dense())
        return V @ (np.exp(-1j * t * w) * (V.conj().T @ u0))
    from scipy.sparse.linalg import LinearOperator, expm_multiply
    lin = LinearOperator((op.dim, op.dim), matvec=lambda v: -1j * t * op(v),
                         dtype=complex)
    return expm_multiply(lin, u0, traceA=0.0)


# ---------------------------------------------------------------------------
# a-priori error bound
# ---------------------------------------------------------------------------

@dataclass
class AprioriBound:
    k: int
    theta: float
    mu_k: float
    nu_k: float
    norm_k: float        # ||u0||_k   (Euclidean)
    norm_k1: float       # ||u0||_{k+1}
    rho: float
    order: float

    def bound(self, t: float) -> float:
        """Error bound after integrating to time t with theta = tau*rho."""
        return (t * self.mu_k * self.norm_k1 + self.nu_k * self.norm_k) \
            / self.rho ** self.k

    def bound_tau(self, t: float, tau: float) -> float:
        """Fixed-H refinement: the bound scales as tau^r below theta/rho."""
        r = self.k
        return (t * self.mu_k * self.norm_k1 + self.nu_k * self.norm_k) \
            * (tau * self.rho / self.theta) ** r / self.rho ** r

    def __str__(self):
        return (f"k={self.k}, theta={self.theta:g}: mu={self.mu_k:.6g}, "
                f"nu={self.nu_k:.6g}, |u0|_k={self.norm_k:.6g}, "
                f"|u0|_k+1={self.norm_k1:.6g}, rho={self.rho:.6g}")


def apriori_bound(method: SplittingMethod, op: HamiltonianOperator, u0,
                  k: int, theta: float) -> AprioriBound:
    """Assemble the time-step error bound for regularity index k.

    Requires 0 < theta < y*.  k above the method's order makes mu_k or
    nu_k infinite (with a warning), and the bound degenerates to inf.
    """
    if k < 0:
        raise ValueError("regularity index k must be >= 0")
    K = method_matrix(method)
    ystar = polyprop.stability_threshold(K)
    if not 0.0 < theta < ystar:
        raise StabilityError(
            f"need 0 < theta < y* = {ystar:.6g}, got {theta}")
    mu, nu = polyprop.error_coefficients(K, theta, [k])
    u0 = np.asarray(u0, dtype=complex)
    nk = h_power_norm(op, u0, k, convention=EUCLIDEAN)
    nk1 = h_power_norm(op, u0, k + 1, convention=EUCLIDEAN)
    r_phi = K.ctx.phase_order()
    return AprioriBound(k=k, theta=theta, mu_k=mu[k], nu_k=nu[k],
                        norm_k=nk, norm_k1=nk1, rho=op.rho_estimate,
                        order=r_phi)
