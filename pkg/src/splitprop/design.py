"""Construction of new splitting methods for (m, r, theta') targets.

The pipeline has three stages.  First find an even/odd polynomial pair
(p, q) that matches (cos, sin) to order r, carries the required
resonance nodes y_j ~ j*pi with p(y_j) = (-1)^j, p'(y_j) = 0, q(y_j) = 0,
keeps s = p^2 + q^2 - 1 nonnegative, and minimizes the weighted error
objective mu_r + lambda*nu_r at the working point Y = theta' * m.  Then
split s into d^2 + e^2 over all inequivalent real (d even, e odd) pairs
by selecting root representatives of s closed under conjugation and
negation.  Finally assemble each candidate matrix K and peel it into
shear stages, keeping the factorizable candidate with the smallest
coefficient 1-norm.

The determination of (d, e) from (p, q) is badly conditioned, so the
root finding and the peeling both escalate to extended precision when
double-precision residuals miss their tolerances.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.optimize import minimize

from . import polyprop
from .errors import (FactorizationError, InfeasibleDesignError,
                     SpectralFactorizationError)
from .methods import SplittingMethod
from .polynomials import EVEN, ODD, ParityPolynomial

_NODE_WINDOW = 0.25          # nodes are searched within j*pi +- this
_SEED = 20260809


@dataclass(frozen=True)
class DesignTarget:
    m: int
    r: int
    theta_prime: float
    lam: float = 0.1

    def __post_init__(self):
        if self.m < 1:
            raise InfeasibleDesignError("need at least one stage")
        if self.r < 0 or self.r % 2 != 0:
            raise InfeasibleDesignError("order r must be even and >= 0")
        if not 0.0 < self.theta_prime < 2.0:
            raise InfeasibleDesignError("theta' must lie in (0, 2)")
        if self.r > 2 * self.m:
            raise InfeasibleDesignError(
                f"order {self.r} exceeds the freedom of {self.m} stages")
        if not self.lam < 1.0:
            raise InfeasibleDesignError("objective weight lambda must be < 1")
        if self.dof < 0:
            raise InfeasibleDesignError(
                f"target (m={self.m}, r={self.r}, theta'={self.theta_prime}) "
                f"leaves {self.dof} degrees of freedom")

    @property
    def big_theta(self) -> float:
        return self.theta_prime * self.m

    @property
    def n_nodes(self) -> int:
        return int(math.floor(self.big_theta / math.pi + 1e-12))

    @property
    def dof(self) -> int:
        return 2 * self.m + 1 - 3 * self.r // 2 - 3 * self.n_nodes


@dataclass
class PQPair:
    p: ParityPolynomial          # even, degree <= 2m
    q: ParityPolynomial          # odd, degree <= 2m+1
    resonance_nodes: tuple
    mu_r: float = math.nan
    nu_r: float = math.nan


# ---------------------------------------------------------------------------
# step 1: the (p, q) search
# ---------------------------------------------------------------------------

def _cos_taylor_z(n_terms):
    """cos Taylor coefficients over even powers: index j <-> y^(2j)."""
    return np.array([(-1.0) ** j / math.factorial(2 * j) for j in range(n_terms)])


def _sin_taylor_z(n_terms):
    """sin Taylor coefficients over odd powers: index j <-> y^(2j+1)."""
    return np.array([(-1.0) ** j / math.factorial(2 * j + 1) for j in range(n_terms)])


class _PQProblem:
    """Linear-algebra view of the (p, q) constraints.

    Unknowns are the p coefficients at t^(2j) and q coefficients at
    t^(2j+1) for t = y/Y, with the Taylor-fixed low-order entries
    substituted out.  Node and tangency conditions are linear in the
    remaining free vector because free coefficients only meet each other
    at powers beyond 2r.
    """

    def __init__(self, target: DesignTarget):
        self.target = target
        m, r = target.m, target.r
        self.Y = target.big_theta
        self.n_p = m + 1                     # p coeffs j = 0..m
        self.n_q = m + 1                     # q coeffs j = 0..m
        cz = _cos_taylor_z(self.n_p)
        sz = _sin_taylor_z(self.n_q)
        powers_p = 2 * np.arange(self.n_p)
        powers_q = 2 * np.arange(self.n_q) + 1
        self.t_fix_p = cz * self.Y ** powers_p      # t-scaled cos coeffs
        self.t_fix_q = sz * self.Y ** powers_q
        self.fix_p = np.arange(0, r // 2 + 1)
        self.fix_q = np.arange(0, r // 2)
        self.free_p = np.arange(r // 2 + 1, self.n_p)
        self.free_q = np.arange(r // 2, self.n_q)
        self.n_free = self.free_p.size + self.free_q.size

    def _full_vectors(self, w):
        """Free vector w -> (p t-coeffs, q t-coeffs), fixed entries filled."""
        pc = np.zeros(self.n_p)
        qc = np.zeros(self.n_q)
        pc[self.fix_p] = self.t_fix_p[self.fix_p]
        qc[self.fix_q] = self.t_fix_q[self.fix_q]
        pc[self.free_p] = w[: self.free_p.size]
        qc[self.free_q] = w[self.free_p.size:]
        return pc, qc

    def _monomials(self, pc, qc):
        """t-coefficient vectors -> full y-monomial arrays (p even, q odd)."""
        p_y = np.zeros(2 * self.n_p - 1)
        q_y = np.zeros(2 * self.n_q)
        powers_p = 2 * np.arange(self.n_p)
        powers_q = 2 * np.arange(self.n_q) + 1
        p_y[powers_p] = pc / self.Y ** powers_p
        q_y[powers_q] = qc / self.Y ** powers_q
        return p_y, q_y

    def constraints(self, nodes):
        """(C, d) with C w = d encoding tangency and node conditions."""
        r = self.target.r
        rows = []
        rhs = []
        # base polynomials with free entries zeroed
        pc0 = np.zeros(self.n_p)
        qc0 = np.zeros(self.n_q)
        pc0[self.fix_p] = self.t_fix_p[self.fix_p]
        qc0[self.fix_q] = self.t_fix_q[self.fix_q]
        p0_full = np.zeros(2 * self.n_p - 1)
        p0_full[2 * np.arange(self.n_p)] = pc0
        q0_full = np.zeros(2 * self.n_q)
        q0_full[2 * np.arange(self.n_q) + 1] = qc0

        # tangency: coefficients of t^w of p^2+q^2-1 vanish for w = r+2..2r
        if r >= 2:
            s0 = np.convolve(p0_full, p0_full) + np.convolve(q0_full, q0_full)
            s0[0] -= 1.0
            for w in range(r + 2, 2 * r + 1, 2):
                row = np.zeros(self.n_free)
                for col, j in enumerate(self.free_p):
                    pw = 2 * j
                    if 0 <= w - pw < p0_full.size:
                        row[col] = 2.0 * p0_full[w - pw]
                for col, j in enumerate(self.free_q):
                    qw = 2 * j + 1
                    if 0 <= w - qw < q0_full.size:
                        row[self.free_p.size + col] = 2.0 * q0_full[w - qw]
                rows.append(row)
                rhs.append(-s0[w])

        # node conditions at t_j = y_j / Y
        for idx, y in enumerate(nodes):
            t = y / self.Y
            sign = (-1.0) ** (idx + 1)
            tp = t ** (2 * np.arange(self.n_p))
            tq = t ** (2 * np.arange(self.n_q) + 1)
            dtp = 2 * np.arange(self.n_p) * t ** np.maximum(2 * np.arange(self.n_p) - 1, 0)
            dtp[0] = 0.0
            row = np.zeros(self.n_free)
            row[: self.free_p.size] = tp[self.free_p]
            rows.append(row)
            rhs.append(sign - float(tp[self.fix_p] @ self.t_fix_p[self.fix_p]))
            row = np.zeros(self.n_free)
            row[: self.free_p.size] = dtp[self.free_p]
            rows.append(row)
            rhs.append(-float(dtp[self.fix_p] @ self.t_fix_p[self.fix_p]))
            row = np.zeros(self.n_free)
            row[self.free_p.size:] = tq[self.free_q]
            rows.append(row)
            rhs.append(-float(tq[self.fix_q] @ self.t_fix_q[self.fix_q]))
        if not rows:
            return np.zeros((0, self.n_free)), np.zeros(0)
        return np.vstack(rows), np.asarray(rhs)

    def solve(self, nodes, w_ref):
        """Point of the constraint manifold nearest to w_ref."""
        C, d = self.constraints(nodes)
        if C.shape[0] == 0:
            return w_ref
        corr = np.linalg.lstsq(C, C @ w_ref - d, rcond=None)[0]
        return w_ref - corr

    def nullspace(self, nodes):
        C, _ = self.constraints(nodes)
        if C.shape[0] == 0:
            return np.eye(self.n_free)
        _, sv, vt = np.linalg.svd(C)
        rank = int(np.sum(sv > max(C.shape) * np.finfo(float).eps * sv[0]))
        return vt[rank:].T


def _eps_p_eval(dp_coeffs, y, deg_p):
    """p(y) - cos(y) without cancellation at small y.

    dp_coeffs holds p's monomial coefficients minus the double-rounded
    cos Taylor coefficients (exact zeros where the design fixes them);
    the cos tail beyond the polynomial degree is summed explicitly.
    """
    acc = np.zeros_like(y)
    for c in dp_coeffs[::-1]:
        acc = acc * y + c
    # tail: sum_{2j > deg_p} (-1)^j y^(2j) / (2j)!
    j0 = deg_p // 2 + 1
    z = y * y
    term = (-1.0) ** j0 * z ** j0 / math.factorial(2 * j0)
    tail = term.copy()
    j = j0
    while np.max(np.abs(term)) > 1e-300 and j < j0 + 60:
        j += 1
        term = term * (-z) / ((2 * j) * (2 * j - 1))
        tail += term
    return acc - tail


def _phase_offset(eps_p, p_val, y, nodes):
    """phi(y) - y for the candidate p, stable near 0 and across nodes."""
    out = np.empty_like(y)
    small = y < min(1.2, 0.45 * (nodes[0] if len(nodes) else np.inf))
    if np.any(small):
        ys = y[small]
        x = -eps_p[small] / np.sin(ys)
        # Newton on cos(y+x) - p(y) = 0 written difference-stable
        for _ in range(4):
            g = -2.0 * np.sin(ys + 0.5 * x) * np.sin(0.5 * x) - eps_p[small]
            x = x + g / np.sin(ys + x)
        out[small] = x
    if np.any(~small):
        yl = y[~small]
        lvl = np.searchsorted(nodes, yl, side="right") if len(nodes) else 0
        sgn = np.where(np.asarray(lvl) % 2 == 0, 1.0, -1.0)
        phi = lvl * np.pi + np.arccos(np.clip(sgn * p_val[~small], -1.0, 1.0))
        out[~small] = phi - yl
    return out


class _Objective:
    """mu_r + lambda*nu_r at Y plus feasibility penalties, from (p, q)."""

    def __init__(self, problem: _PQProblem, w_star, null_basis):
        self.pr = problem
        self.w_star = w_star
        self.null = null_basis
        t = problem.target
        self.Y, self.r, self.lam = problem.Y, t.r, t.lam
        self.l = t.n_nodes
        n = 2600
        self.y_obj = np.linspace(self.Y / n, self.Y, n)
        self.y_stab = np.linspace(self.Y * 1.02 / 2000, self.Y * 1.02, 2000)
        self.y_pos = np.linspace(0.0, 1.5 * self.Y, 1500)
        # double-rounded cos coefficients, for the stable eps_p difference
        self.cos_mono = np.zeros(2 * problem.n_p - 1)
        self.cos_mono[0::2] = _cos_taylor_z(problem.n_p)

    def nodes_from(self, eta):
        return np.array([(j + 1) * math.pi + eta[j] for j in range(self.l)])

    def build(self, x):
        z = x[: self.null.shape[1]]
        eta_raw = x[self.null.shape[1]:]
        eta = np.clip(eta_raw, -_NODE_WINDOW, _NODE_WINDOW)
        pen = 1e4 * float(np.sum((eta_raw - eta) ** 2))
        nodes = self.nodes_from(eta)
        if self.l and nodes[-1] >= self.Y:
            pen += 1e4 * (nodes[-1] - self.Y + 0.01)
            nodes[-1] = self.Y - 0.01
        w = self.pr.solve(nodes, self.w_star + self.null @ z)
        pc, qc = self.pr._full_vectors(w)
        p_y, q_y = self.pr._monomials(pc, qc)
        return p_y, q_y, nodes, pen

    def parts(self, p_y, q_y, nodes):
        """(mu_r, nu_r, penalty); penalties grade the infeasibility."""
        r, Y = self.r, self.Y
        pen = 0.0
        p_pol = np.polynomial.Polynomial(p_y)
        q_pol = np.polynomial.Polynomial(q_y)

        # stability: |p| <= 1 through a small margin past Y
        viol = np.max(np.abs(p_pol(self.y_stab))) - 1.0
        if viol > 1e-10:
            pen += 1e4 * viol + 1.0

        # positivity of s-tilde = (p^2+q^2-1)/y^(2r+2)
        pp = np.convolve(p_y, p_y)
        qq = np.convolve(q_y, q_y)
        s = np.zeros(max(pp.size, qq.size))
        s[: pp.size] += pp
        s[: qq.size] += qq
        s[0] -= 1.0
        low = np.max(np.abs(s[: 2 * r + 2]))
        scale = max(1.0, np.max(np.abs(s)))
        if low > 1e-7 * scale:
            pen += 1e3 * low / scale + 1.0
        st = s[2 * r + 2:]
        nz = np.nonzero(np.abs(st) > 1e-13 * scale)[0]
        if nz.size == 0 or st[nz[-1]] <= 0.0:
            pen += 10.0
        st = st[: nz[-1] + 1] if nz.size else st
        st_pol = np.polynomial.Polynomial(st if st.size else [0.0])
        st_vals = st_pol(self.y_pos)
        off_node = np.ones_like(self.y_pos, dtype=bool)
        for y_j in nodes:
            off_node &= np.abs(self.y_pos - y_j) > 0.08
        worst = float(np.min(st_vals[off_node], initial=0.0))
        if worst < 0.0:
            pen += 1e3 * (-worst) / max(1.0, np.max(np.abs(st_vals))) + 1.0
        near = ~off_node
        if np.any(near):
            dip = float(np.min(st_vals[near]))
            if dip < -1e-9 * max(1.0, np.max(np.abs(st_vals))):
                pen += 1e3 * (-dip) + 1.0

        # objective parts on (0, Y]
        y = self.y_obj
        dp = p_y - self.cos_mono[: p_y.size]
        eps_p = _eps_p_eval(dp, y, p_y.size - 1)
        p_val = p_pol(y)
        one_minus_p = 2.0 * np.sin(0.5 * y) ** 2 - eps_p
        sin2 = one_minus_p * (1.0 + p_val)
        if np.any(sin2 <= 0.0):
            pen += 1e2 * float(np.sum(sin2 <= 0.0)) / y.size + 1.0
            sin2 = np.maximum(sin2, 1e-30)
        x_off = _phase_offset(eps_p, p_val, y, nodes)
        mu_grid = np.abs(x_off) * Y ** r / y ** (r + 1)
        # leading behavior of eps_p gives the y -> 0 limit of the integrand
        lead = dp[r + 2] if r + 2 < dp.size else 0.0
        mu = max(float(np.max(mu_grid)), abs(lead) * Y ** r)

        big_s = np.maximum((y ** (2 * r + 2)) * st_pol(y) / sin2, 0.0)
        delta = 2.0 * (np.sqrt(1.0 + big_s) - 1.0)
        en = np.sqrt(delta * (1.0 + 0.5 * delta + np.sqrt(big_s)))
        nu_grid = en * (Y / y) ** r
        sigma0_sq = max(-2.0 * p_y[2], 1e-30) if p_y.size > 2 else 1.0
        st0 = max(st[0], 0.0) if st.size else 0.0
        nu = max(float(np.max(nu_grid)), math.sqrt(st0 / sigma0_sq) * Y ** r)
        return mu, nu, pen

    def __call__(self, x):
        p_y, q_y, nodes, pen0 = self.build(x)
        mu, nu, pen = self.parts(p_y, q_y, nodes)
        return mu + self.lam * nu + pen + pen0


def optimize_pq(target: DesignTarget, n_starts=4, maxiter=None) -> PQPair:
    """Search for the constrained (p, q) pair minimizing mu_r + lam*nu_r.

    Multi-start Nelder-Mead over the constraint nullspace and the node
    offsets, seeded from the least-squares point closest to the Taylor
    continuation of (cos, sin).  Raises InfeasibleDesignError when no
    start produces a feasible pair; a best-found pair with residual
    penalty triggers a warning instead of failing.
    """
    problem = _PQProblem(target)
    nodes0 = np.array([(j + 1) * math.pi for j in range(target.n_nodes)])
    if target.n_nodes and nodes0[-1] >= problem.Y:
        nodes0[-1] = problem.Y - 0.01
    # start: the feasible point nearest to the exact cos/sin continuation
    w_exp = np.concatenate([problem.t_fix_p[problem.free_p],
                            problem.t_fix_q[problem.free_q]])
    w_star = problem.solve(nodes0, w_exp)
    null = problem.nullspace(nodes0)
    obj = _Objective(problem, w_star, null)

    dim = null.shape[1] + target.n_nodes
    rng = np.random.default_rng(_SEED)
    starts = [np.zeros(dim)]
    w_scale = max(1.0, float(np.max(np.abs(w_star))))
    for _ in range(max(0, n_starts - 1)):
        x = np.concatenate([
            rng.normal(scale=0.05 * w_scale, size=null.shape[1]),
            rng.uniform(-0.15, 0.15, size=target.n_nodes)])
        starts.append(x)

    if maxiter is None:
        maxiter = 250 * max(dim, 1)
    best_x, best_val = None, math.inf
    for x0 in starts:
        if dim == 0:
            best_x, best_val = np.zeros(0), obj(np.zeros(0))
            break
        res = minimize(obj, x0, method="Nelder-Mead",
                       options={"maxiter": maxiter, "xatol": 1e-10,
                                "fatol": 1e-12, "adaptive": True})
        if res.fun < best_val:
            best_x, best_val = res.x, res.fun
    if best_x is None:
        raise InfeasibleDesignError("optimizer produced no candidate at all")

    p_y, q_y, nodes, pen0 = obj.build(best_x)
    mu, nu, pen = obj.parts(p_y, q_y, nodes)
    if pen + pen0 > 1.0:
        raise InfeasibleDesignError(
            f"no feasible (p, q) found for (m={target.m}, r={target.r}, "
            f"theta'={target.theta_prime}); best penalty {pen + pen0:.3g}")
    if pen + pen0 > 0.0:
        warnings.warn(f"(p, q) search left a small residual penalty "
                      f"{pen + pen0:.3g}; returning best found")
    pair = PQPair(
        p=ParityPolynomial(p_y[0::2], EVEN),
        q=ParityPolynomial(q_y[1::2], ODD),
        resonance_nodes=tuple(float(v) for v in nodes),
        mu_r=mu, nu_r=nu)
    return pair


# ---------------------------------------------------------------------------
# step 2: sum-of-squares splitting by root selection
# ---------------------------------------------------------------------------

def _mp_roots(coeffs_ascending, dps=40):
    """Roots of a real polynomial via mpmath; returns mp.mpc values."""
    with mp.workdps(dps):
        cs = [mp.mpf(float(c)) for c in coeffs_ascending[::-1]]
        while cs and cs[0] == 0:
            cs = cs[1:]
        if len(cs) <= 1:
            return []
        try:
            return list(mp.polyroots(cs, maxsteps=400, extraprec=160))
        except mp.libmp.NoConvergence as exc:
            raise SpectralFactorizationError(
                f"root finding did not converge on degree {len(cs) - 1}; "
                "the squared-residual polynomial is badly conditioned") from exc


def _cluster_roots(roots, tol):
    """Group near-identical roots into [center (mp.mpc), multiplicity]."""
    out = []
    for r in sorted(roots, key=lambda v: (float(mp.re(v)), float(mp.im(v)))):
        for entry in out:
            if abs(complex(r) - complex(entry[0])) <= tol * (1.0 + abs(complex(entry[0]))):
                entry[0] = (entry[0] * entry[1] + r) / (entry[1] + 1)
                entry[1] += 1
                break
        else:
            out.append([mp.mpc(r), 1])
    return out


def _find_cluster(clusters, used, value, tol):
    value = complex(value)
    for j, (v, _k) in enumerate(clusters):
        if used[j]:
            continue
        if abs(complex(v) - value) <= tol * (1.0 + abs(value)):
            return j
    return None


def split_sum_of_squares(p: ParityPolynomial, q: ParityPolynomial,
                         residual_tol=1e-9):
    """All inequivalent real pairs (d even, e odd) with d^2+e^2 = p^2+q^2-1.

    Solutions are built as f = d + i e from root selections of s: one
    member of each {y0, -y0} root pair, with the selection closed under
    simultaneous conjugation and negation.  Real roots of odd multiplicity
    make a real split impossible and raise SpectralFactorizationError.
    """
    s = (p * p) + (q * q)
    s_z = s.coeffs.copy()
    s_z[0] -= 1.0
    scale = max(1.0, float(np.max(np.abs(s_z))))
    if np.all(np.abs(s_z) <= 1e-13 * scale):
        # p^2 + q^2 == 1: the orthogonal-like case, d = e = 0
        return [(ParityPolynomial([0.0], EVEN), ParityPolynomial([0.0], ODD))]
    # strip the forced tangency zero at the origin: z-multiplicity k0 in s
    # means y-multiplicity 2*k0, of which f = d + i e takes k0 zeros
    nz = np.nonzero(np.abs(s_z) > 1e-11 * scale)[0]
    k0 = int(nz[0])
    st_z = np.trim_zeros(s_z[k0:], "b")
    if st_z[-1] < 0.0:
        raise SpectralFactorizationError(
            "s has negative leading coefficient; not nonnegative on the line")

    # root-pair bookkeeping happens in the y plane to keep {y0, -y0} visible
    st_full = np.zeros(2 * st_z.size - 1)
    st_full[0::2] = st_z
    clusters = _cluster_roots(_mp_roots(st_full), tol=1e-7)
    tol = 1e-7

    real_pairs, imag_pairs, quads = [], [], []
    used = [False] * len(clusters)
    for i, (v, k) in enumerate(clusters):
        if used[i]:
            continue
        vc = complex(v)
        used[i] = True
        if abs(vc.imag) <= tol * (1.0 + abs(vc)):
            j = _find_cluster(clusters, used, -vc.real, tol)
            if j is None or clusters[j][1] != k:
                raise SpectralFactorizationError(
                    f"unpaired real root near y = {vc.real:.6g}")
            used[j] = True
            if k % 2 != 0:
                raise SpectralFactorizationError(
                    f"real root at y = {abs(vc.real):.6g} has odd multiplicity "
                    f"{k}; no real (d, e) split exists")
            real_pairs.append((mp.mpf(abs(mp.re(v))), k))
        elif abs(vc.real) <= tol * (1.0 + abs(vc)):
            j = _find_cluster(clusters, used, complex(0.0, -abs(vc.imag)), tol)
            if j is None or clusters[j][1] != k:
                raise SpectralFactorizationError(
                    f"unpaired imaginary root near {vc:.6g}")
            used[j] = True
            imag_pairs.append((mp.mpc(0, abs(mp.im(v))), k))
        else:
            js = []
            for w in (-vc, vc.conjugate(), -vc.conjugate()):
                j = _find_cluster(clusters, used, w, tol)
                if j is None:
                    raise SpectralFactorizationError(
                        f"root quadruple incomplete near {vc:.6g}")
                used[j] = True
                js.append(j)
            if any(clusters[j][1] != k for j in js):
                raise SpectralFactorizationError(
                    f"inconsistent multiplicities in quadruple near {vc:.6g}")
            quads.append((mp.mpc(v), k))

    # selections closed under r -> -conj(r): quadruples take x copies of
    # {v, -conj v} and k-x of {-v, conj v}; imaginary roots are self-closed
    choice_sets = []
    for v, k in quads:
        opts = []
        for x in range(k + 1):
            opts.append([v, -mp.conj(v)] * x + [-v, mp.conj(v)] * (k - x))
        choice_sets.append(opts)
    for v, k in imag_pairs:
        opts = []
        for n_plus in range(k + 1):
            opts.append([v] * n_plus + [-v] * (k - n_plus))
        choice_sets.append(opts)

    base = [mp.mpf(0)] * k0
    for a, k in real_pairs:
        base.extend([a] * (k // 2) + [-a] * (k // 2))

    lead = float(st_z[-1])
    results = []
    seen = set()
    for combo in (itertools.product(*choice_sets) if choice_sets else [()]):
        sel = list(base)
        for group in combo:
            sel.extend(group)
        for d, e in _scaled_candidates(sel, lead, s_z, residual_tol, scale):
            key = (tuple(np.round(d.coeffs, 9)), tuple(np.round(e.coeffs, 9)))
            if key not in seen:
                seen.add(key)
                results.append((d, e))
    if not results:
        raise SpectralFactorizationError(
            "no root selection produced a real (d, e) pair within tolerance")
    results.sort(key=lambda de: (tuple(de[0].coeffs), tuple(de[1].coeffs)))
    return results


def _scaled_candidates(sel, lead, s_z, residual_tol, scale):
    """Scalings of prod(y - r) with f(y) f(-y) = s, projected to real (d, e)."""
    with mp.workdps(40):
        coeffs = [mp.mpc(1)]
        for r in sel:
            new = [mp.mpc(0)] * (len(coeffs) + 1)
            for i, c in enumerate(coeffs):
                new[i + 1] += c
                new[i] -= r * c
            coeffs = new
        h = np.array([complex(c) for c in coeffs])
    deg = h.size - 1
    # f f(-y) has leading coefficient alpha^2 lc(h)^2 (-1)^deg = lead
    want = lead * (-1.0) ** deg
    out = []
    if want == 0.0:
        return out
    mag = math.sqrt(abs(want))
    alphas = (mag, -mag) if want > 0 else (1j * mag, -1j * mag)
    for alpha in alphas:
        f = alpha * h
        junk = float(np.max(np.abs(np.imag(f[0::2]))))
        if f.size > 1:
            junk = max(junk, float(np.max(np.abs(np.real(f[1::2])))))
        if junk > 1e-6 * max(1.0, float(np.max(np.abs(f)))):
            continue
        d_m = np.real(f[0::2])
        e_m = np.imag(f[1::2]) if f.size > 1 else np.zeros(1)
        d = ParityPolynomial(d_m if d_m.size else [0.0], EVEN)
        e = ParityPolynomial(e_m if e_m.size else [0.0], ODD)
        resid = (d * d + e * e).coeffs
        n = max(resid.size, s_z.size)
        rr = np.zeros(n)
        rr[: resid.size] = resid
        rr[: s_z.size] -= s_z
        if np.max(np.abs(rr)) <= residual_tol * scale:
            out.append((d.trimmed(1e-14), e.trimmed(1e-14)))
    return out


# ---------------------------------------------------------------------------
# step 2b/3: assembly and factorization
# ---------------------------------------------------------------------------

def assemble_K(p: ParityPolynomial, q: ParityPolynomial,
               d: ParityPolynomial, e: ParityPolynomial) -> polyprop.PropagationMatrix:
    """K = [[p+d, q+e], [-q+e, p-d]]; unit determinant by construction."""
    if (p.parity, q.parity, d.parity, e.parity) != (EVEN, ODD, EVEN, ODD):
        raise ValueError("parities must be (p even, q odd, d even, e odd)")
    return polyprop.PropagationMatrix(p + d, q + e, (-q) + e, p - d)


def _num_degree(c, zero_tol):
    idx = [i for i, v in enumerate(c) if abs(v) > zero_tol]
    return idx[-1] if idx else -1


def _peel(k1, k2, k3, k4, zero_rel, max_pairs):
    """Strip shear pairs off K from both ends; returns (a_list, b_list).

    Coefficient lists are in the parity-compressed z basis (k1, k4 even;
    k2, k3 odd).  A left round removes the last-applied stage (the shear
    pair acting last on the state), a right round the first-applied one;
    alternating halves the number of rounds any quantization residue can
    compound through, which matters because each round amplifies input
    noise by an order of magnitude or more on awkward coefficient sets.
    Canceled top slots are zeroed outright, for the same reason.  Near-
    zero detection is relative to the current round's largest
    coefficient.
    """
    left_a, left_b = [], []
    right_a, right_b = [], []
    one = [k1[0] * 0 + 1]

    def cur_tol():
        big = max(max(abs(v) for v in c) for c in (k1, k2, k3, k4))
        return zero_rel * max(1.0, float(big))

    def isid(tol):
        return (_num_degree(_sub(k1, one), tol) < 0 and
                _num_degree(k2, tol) < 0 and
                _num_degree(k3, tol) < 0 and
                _num_degree(_sub(k4, one), tol) < 0)

    def degs(tol):
        return (_num_degree(k1, tol), _num_degree(k2, tol),
                _num_degree(k3, tol), _num_degree(k4, tol))

    stalled = 0
    for rnd in range(2 * max_pairs):
        zero_tol = cur_tol()
        if isid(zero_tol):
            break
        if rnd % 2 == 0:
            # left: peel [[1, a y],[0,1]] then [[1,0],[-b y,1]].
            # y-degrees are 2*d1, 2*d2+1 (row 1) and 2*d3+1, 2*d4 (row 2);
            # the top of K1 cancels iff d1 == d3+1, of K2 iff d2 == d4.
            d1, d2, d3, d4 = degs(zero_tol)
            cand = []
            if d1 >= 1 and d3 == d1 - 1:
                cand.append((abs(k3[d3]), k1[d1] / k3[d3]))
            if d2 >= 0 and d4 == d2:
                cand.append((abs(k4[d4]), k2[d2] / k4[d4]))
            a = max(cand)[1] if cand else 0
            if a != 0:
                k1 = _axpy(k1, k3, -a, shift=1)   # k1 -= a*y*k3
                k2 = _axpy(k2, k4, -a, shift=0)   # k2 -= a*y*k4
                if d1 >= 1 and d3 == d1 - 1:
                    k1[d1] = k1[d1] * 0
                if d2 >= 0 and d4 == d2:
                    k2[d2] = k2[d2] * 0
            d1, d2, d3, d4 = degs(zero_tol)
            cand = []
            if d3 >= 0 and d1 == d3:
                cand.append((abs(k1[d1]), -k3[d3] / k1[d1]))
            if d4 >= 1 and d2 == d4 - 1:
                cand.append((abs(k2[d2]), -k4[d4] / k2[d2]))
            b = max(cand)[1] if cand else 0
            if b != 0:
                k3 = _axpy(k3, k1, b, shift=0)    # k3 += b*y*k1
                k4 = _axpy(k4, k2, b, shift=1)    # k4 += b*y*k2
                if d3 >= 0 and d1 == d3:
                    k3[d3] = k3[d3] * 0
                if d4 >= 1 and d2 == d4 - 1:
                    k4[d4] = k4[d4] * 0
            left_a.append(a)
            left_b.append(b)
        else:
            # right: peel [[1,0],[-b y,1]] then [[1, a y],[0,1]] off the
            # other end (column operations instead of row operations)
            d1, d2, d3, d4 = degs(zero_tol)
            cand = []
            if d1 >= 1 and d2 == d1 - 1:
                cand.append((abs(k2[d2]), -k1[d1] / k2[d2]))
            if d3 >= 0 and d4 == d3:
                cand.append((abs(k4[d4]), -k3[d3] / k4[d4]))
            b = max(cand)[1] if cand else 0
            if b != 0:
                k1 = _axpy(k1, k2, b, shift=1)    # k1 += b*y*k2
                k3 = _axpy(k3, k4, b, shift=0)    # k3 += b*y*k4
                if d1 >= 1 and d2 == d1 - 1:
                    k1[d1] = k1[d1] * 0
                if d3 >= 0 and d4 == d3:
                    k3[d3] = k3[d3] * 0
            d1, d2, d3, d4 = degs(zero_tol)
            cand = []
            if d2 >= 0 and d1 == d2:
                cand.append((abs(k1[d1]), k2[d2] / k1[d1]))
            if d4 >= 1 and d3 == d4 - 1:
                cand.append((abs(k3[d3]), k4[d4] / k3[d3]))
            a = max(cand)[1] if cand else 0
            if a != 0:
                k2 = _axpy(k2, k1, -a, shift=0)   # k2 -= a*y*k1
                k4 = _axpy(k4, k3, -a, shift=1)   # k4 -= a*y*k3
                if d2 >= 0 and d1 == d2:
                    k2[d2] = k2[d2] * 0
                if d4 >= 1 and d3 == d4 - 1:
                    k4[d4] = k4[d4] * 0
            right_a.append(a)
            right_b.append(b)
        if a == 0 and b == 0:
            stalled += 1
            if stalled >= 2:
                raise FactorizationError(
                    "peeling stalled: degree pattern admits no shear stage")
        else:
            stalled = 0
    else:
        if not isid(cur_tol()):
            raise FactorizationError(
                "matrix did not reduce to the identity within the stage budget")
    # drop no-op rounds picked up while the other side finished the job
    while left_a and left_a[-1] == 0 and left_b[-1] == 0:
        left_a.pop(), left_b.pop()
    while right_a and right_a[-1] == 0 and right_b[-1] == 0:
        right_a.pop(), right_b.pop()
    return (left_a + right_a[::-1], left_b + right_b[::-1])


def _pad(c, n):
    return list(c) + [c[0] * 0] * (n - len(c))


def _sub(x, y):
    n = max(len(x), len(y))
    out = _pad(x, n)
    for i, v in enumerate(y):
        out[i] = out[i] - v
    return out


def _axpy(x, y, alpha, shift):
    """x + alpha * (y shifted up `shift` z-slots); multiplication by the
    variable y moves an odd entry one z slot up into an even one."""
    n = max(len(x), len(y) + shift)
    out = _pad(x, n)
    for i, v in enumerate(y):
        out[i + shift] = out[i + shift] + alpha * v
    return out


def _coeff_vector(K: polyprop.PropagationMatrix, n_z: int):
    out = np.zeros(4 * n_z)
    for i, e in enumerate(K.entries):
        out[i * n_z: i * n_z + e.coeffs.size] = e.coeffs
    return out


def _gauss_newton_polish(a, b, K, iters=60):
    """Levenberg-Marquardt refinement of (a, b) against K's coefficients.

    The peel's late-stage drift sits mostly off the factorable manifold;
    damping buys a basin large enough to recover from sizable drift on
    badly conditioned coefficient sets.
    """
    x = np.concatenate([a, b]).astype(float)
    L = len(a)
    n_z = max(e.coeffs.size for e in K.entries) + 2
    target = _coeff_vector(K, n_z)
    scale = max(1.0, np.max(np.abs(target)))

    def fvec(x):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return _coeff_vector(polyprop.compose_K((x[:L], x[L:])), n_z)

    def jac(x):
        h = 1e-7
        J = np.empty((target.size, 2 * L))
        for j in range(2 * L):
            xp = x.copy()
            xp[j] += h
            xm = x.copy()
            xm[j] -= h
            J[:, j] = (fvec(xp) - fvec(xm)) / (2 * h)
        return J

    r = fvec(x) - target
    cost = float(r @ r)
    lam = 1e-6
    for _ in range(iters):
        if np.max(np.abs(r)) < 1e-15 * scale:
            break
        J = jac(x)
        g = J.T @ r
        JtJ = J.T @ J
        diag = np.diag(np.maximum(np.diag(JtJ), 1e-12))
        accepted = False
        for _inner in range(12):
            try:
                step = np.linalg.solve(JtJ + lam * diag, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            if not np.all(np.isfinite(step)):
                lam *= 10.0
                continue
            x_new = x + step
            r_new = fvec(x_new) - target
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                x, r, cost = x_new, r_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
    return list(x[:L]), list(x[L:])


def factorize_K(K: polyprop.PropagationMatrix,
                residual_tol=1e-10) -> SplittingMethod:
    """Recover the stage coefficients (a_i, b_i) reproducing K.

    Peels in double precision, escalating to extended precision when the
    recomposition residual misses the tolerance, and finishes with a
    Gauss-Newton polish of the coefficients against K.
    """
    max_pairs = K.max_degree + 2

    def attempt(to_field, zero_rel):
        k1 = [to_field(v) for v in K.k1.coeffs]
        k2 = [to_field(v) for v in K.k2.coeffs]
        k3 = [to_field(v) for v in K.k3.coeffs]
        k4 = [to_field(v) for v in K.k4.coeffs]
        a, b = _peel(k1, k2, k3, k4, zero_rel, max_pairs)
        return [float(v) for v in a], [float(v) for v in b]

    def residual(a, b):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            K2 = polyprop.compose_K((np.asarray(a), np.asarray(b)))
        worst = 0.0
        for e_new, e_old in zip(K2.entries, K.entries):
            n = max(e_new.coeffs.size, e_old.coeffs.size)
            x = np.zeros(n)
            x[: e_new.coeffs.size] = e_new.coeffs
            x[: e_old.coeffs.size] -= e_old.coeffs
            ref = max(1.0, float(np.max(np.abs(e_old.coeffs))))
            worst = max(worst, float(np.max(np.abs(x))) / ref)
        return worst

    def trimmed(a, b):
        # drop trailing pairs that only mop up cancellation noise
        while len(a) > 1 and residual(a[:-1], b[:-1]) <= residual_tol:
            a, b = a[:-1], b[:-1]
        return a, b

    def finish(a, b):
        a, b = trimmed(a, b)
        if residual(a, b) > residual_tol:
            a, b = _gauss_newton_polish(a, b, K)
            a, b = trimmed(a, b)
        return a, b

    try:
        a, b = finish(*attempt(float, 1e-11))
        res = residual(a, b)
        if res <= residual_tol:
            return _method_from_pairs(a, b)
    except FactorizationError:
        res = None
    # extended-precision retry; each peeling round can amplify roundoff by
    # several orders of magnitude, so scale the working precision with the
    # degree of the matrix
    dps = max(60, 4 * K.max_degree)
    with mp.workdps(dps):
        try:
            a, b = attempt(lambda v: mp.mpf(float(v)), mp.mpf(10) ** (30 - dps))
        except FactorizationError as exc:
            raise FactorizationError(
                f"not factorizable: {exc} (double-precision residual: {res})",
                residual=res) from exc
    a, b = finish(a, b)
    res2 = residual(a, b)
    if res2 > residual_tol:
        raise FactorizationError(
            f"factorization residual {res2:.3e} exceeds {residual_tol:.1e} "
            "even in extended precision", residual=res2)
    return _method_from_pairs(a, b)


def _method_from_pairs(a, b):
    n = len(a)
    m = n - 1 if (n > 1 and b[-1] == 0.0) else n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")   # factored stages need not sum to 1
        return SplittingMethod(name="factorized", m=m, r=0, theta_prime=1.0,
                               a=tuple(a), b=tuple(b))


# ---------------------------------------------------------------------------
# step 3: the full pipeline
# ---------------------------------------------------------------------------

@dataclass
class DesignResult:
    method: SplittingMethod
    pair: PQPair
    report: polyprop.StabilityReport
    n_candidates: int
    coefficient_sum: float


def design_method(target: DesignTarget, n_starts=4, maxiter=None) -> DesignResult:
    """optimize_pq -> split_sum_of_squares -> assemble_K -> factorize_K.

    Every (d, e) candidate is assembled and factorized; among the ones
    that factor, the method minimizing sum_i(|a_i| + |b_i|) wins, with
    lexicographic coefficient order as the deterministic tie-break.
    """
    pair = optimize_pq(target, n_starts=n_starts, maxiter=maxiter)
    candidates = split_sum_of_squares(pair.p, pair.q)
    factored = []
    failures = []
    for d, e in candidates:
        try:
            K = assemble_K(pair.p, pair.q, d, e)
            meth = factorize_K(K)
        except (FactorizationError, ValueError) as exc:
            failures.append(str(exc))
            continue
        cost = float(np.sum(np.abs(meth.a)) + np.sum(np.abs(meth.b)))
        factored.append((cost, tuple(meth.a) + tuple(meth.b), meth))
    if not factored:
        raise FactorizationError(
            "every (d, e) candidate failed to factor: " + "; ".join(failures))
    factored.sort(key=lambda t: (round(t[0], 9), t[1]))
    cost, _, best = factored[0]
    name = f"designed-m{target.m}-r{target.r}-tp{target.theta_prime:g}"
    method = SplittingMethod(name=name, m=target.m, r=target.r,
                             theta_prime=target.theta_prime,
                             a=best.a, b=best.b)
    K = polyprop.compose_K(method)
    theta = min(target.big_theta,
                polyprop.stability_threshold(K) * (1.0 - 1e-9))
    report = polyprop.analyze(K, theta, ks=[target.r])
    return DesignResult(method=method, pair=pair, report=report,
                        n_candidates=len(candidates), coefficient_sum=cost)
