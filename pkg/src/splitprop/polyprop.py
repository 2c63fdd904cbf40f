"""Stability and error analysis of 2x2 polynomial propagation matrices.

A splitting method applied to the harmonic-oscillator block system is
propagated by a matrix

    K(y) = [[K1(y), K2(y)], [K3(y), K4(y)]],   y = tau * omega,

with K1, K4 even, K2, K3 odd and det K == 1.  Everything observable about
the method's stability and accuracy is a function of K alone: the
stability polynomial p = (K1+K4)/2, the threshold y* where powers of K
start to grow, the phase/amplitude functions (phi, eps, gamma) of the
stable canonical form, and the sup-type error coefficients mu_k, nu_k
that enter the a-priori step-error bounds.

Small-y evaluation is backed by extended-precision Taylor data: the
leading coefficients of phi(y) - y for a high-order method sit far below
double-precision cancellation noise, so grids alone cannot see them.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from . import _series
from .errors import (LossOfPrecisionError, NearResonanceError, StabilityError)
from .polynomials import EVEN, ODD, ParityPolynomial

_DET_TOL = 1e-12
_SERIES_TERMS = 48
# coefficients of the phi - y series below this are treated as exact zeros
# (order-condition residue of double-precision method coefficients)
_ORDER_TOL = 1e-12
_IDENTITY_TOL = 1e-6


class PropagationMatrix:
    """Four parity polynomials K1..K4 with det K == 1 and K(0) == I."""

    def __init__(self, k1, k2, k3, k4, validate=True):
        if (k1.parity, k2.parity, k3.parity, k4.parity) != (EVEN, ODD, ODD, EVEN):
            raise ValueError("K1,K4 must be even and K2,K3 odd")
        self.k1, self.k2, self.k3, self.k4 = k1, k2, k3, k4
        self._ctx = None
        if validate:
            self._validate()

    # -- basics ---------------------------------------------------------

    @classmethod
    def identity(cls):
        return cls(ParityPolynomial([1.0], EVEN), ParityPolynomial([0.0], ODD),
                   ParityPolynomial([0.0], ODD), ParityPolynomial([1.0], EVEN))

    @property
    def entries(self):
        return (self.k1, self.k2, self.k3, self.k4)

    @property
    def max_degree(self):
        return max(e.degree for e in self.entries)

    @property
    def coefficient_scale(self):
        return max(1.0, *(np.max(np.abs(e.coeffs)) for e in self.entries))

    def _validate(self):
        scale = self.coefficient_scale
        det = self.k1 * self.k4 - self.k2 * self.k3
        resid = det.coeffs.copy()
        resid[0] -= 1.0
        if np.max(np.abs(resid)) > _DET_TOL * scale * scale:
            raise ValueError(
                f"det K != 1: worst residual {np.max(np.abs(resid)):.3e}")
        if abs(self.k1.coeffs[0] - 1.0) > _DET_TOL * scale or \
           abs(self.k4.coeffs[0] - 1.0) > _DET_TOL * scale:
            raise ValueError("K(0) is not the identity")

    def is_identity(self, tol=0.0):
        one = ParityPolynomial([1.0], EVEN)
        return all(p.is_zero(tol=tol) if i in (1, 2) else (p - one).is_zero(tol=tol)
                   for i, p in enumerate(self.entries))

    def __call__(self, y):
        """Evaluate as a (2, 2) array (or (..., 2, 2) for array y)."""
        vals = [e(y) for e in self.entries]
        out = np.stack([np.stack(vals[:2], axis=-1),
                        np.stack(vals[2:], axis=-1)], axis=-2)
        return out

    def __repr__(self):
        return (f"PropagationMatrix(deg={self.max_degree}, "
                f"k1={self.k1.coeffs.tolist()}, k2={self.k2.coeffs.tolist()}, "
                f"k3={self.k3.coeffs.tolist()}, k4={self.k4.coeffs.tolist()})")

    @property
    def ctx(self):
        if self._ctx is None:
            self._ctx = _PhaseContext(self)
        return self._ctx


def compose_K(method) -> PropagationMatrix:
    """Exact polynomial product of the stage maps of a splitting method.

    The method's coefficient lists (a_i, b_i) define shear factors
    [[1, a_i y], [0, 1]] and [[1, 0], [-b_i y, 1]]; pair i contributes
    their product with the shear in a acting left of the shear in b, and
    pairs are stacked so that the last pair acts first on the state.

    Accepts anything with .a/.b attributes, or a plain (a, b) tuple.
    """
    if isinstance(method, tuple):
        a, b = method
    else:
        a, b = method.a, method.b
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 1:
        raise ValueError("coefficient arrays a, b must be equal-length 1-d")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite method coefficients")

    k1 = ParityPolynomial([1.0], EVEN)
    k2 = ParityPolynomial([0.0], ODD)
    k3 = ParityPolynomial([0.0], ODD)
    k4 = ParityPolynomial([1.0], EVEN)
    # pair matrix: [[1 - a b y^2, a y], [-b y, 1]]
    for i in range(a.size - 1, -1, -1):
        p1 = ParityPolynomial([1.0, -a[i] * b[i]], EVEN)
        p2 = ParityPolynomial([a[i]], ODD)
        p3 = ParityPolynomial([-b[i]], ODD)
        p4 = ParityPolynomial([1.0], EVEN)
        k1, k2, k3, k4 = (p1 * k1 + p2 * k3, p1 * k2 + p2 * k4,
                          p3 * k1 + p4 * k3, p3 * k2 + p4 * k4)
        for e in (k1, k2, k3, k4):
            if not np.all(np.isfinite(e.coeffs)):
                raise LossOfPrecisionError(
                    f"coefficient overflow while composing stage {i + 1}",
                    stage=i + 1)
    return PropagationMatrix(k1, k2, k3, k4)


def stability_polynomial(K: PropagationMatrix) -> ParityPolynomial:
    """p(y) = (K1(y) + K4(y)) / 2, the half trace."""
    return (K.k1 + K.k4).scaled(0.5)


def q_polynomial(K: PropagationMatrix) -> ParityPolynomial:
    """q(y) = (K2(y) - K3(y)) / 2."""
    return (K.k2 - K.k3).scaled(0.5)


# ---------------------------------------------------------------------------
# phase context: thresholds, resonance nodes, extended-precision Taylor data
# ---------------------------------------------------------------------------

class _PhaseContext:
    """Lazy per-matrix cache of everything phase_amplitude needs."""

    def __init__(self, K: PropagationMatrix):
        self.K = K
        self.p = stability_polynomial(K)
        self.q = q_polynomial(K)
        self.d = (K.k1 - K.k4).scaled(0.5)
        self.m_inferred = max(1, math.ceil(K.max_degree / 2))
        self.scan_cap = 4.0 * self.m_inferred
        self._threshold = None
        self._nodes = None           # crossing nodes for branch tracking
        self._all_touch = None       # every |p|=1 point in (0, y*)
        self._series = None
        self._practical = {}

    # -- stability threshold -------------------------------------------

    def _p_abs_minus_one(self, y):
        return np.abs(self.p(y)) - 1.0

    def _matrix_is_pm_identity(self, y, sign):
        scale = self.K.coefficient_scale
        k1, k2, k3, k4 = (e(y) for e in self.K.entries)
        return max(abs(k1 - sign), abs(k4 - sign), abs(k2), abs(k3)) \
            <= _IDENTITY_TOL * scale

    def _touch_points(self, upto):
        """Real positive roots of p^2 - 1 in (0, upto], polished on p'."""
        pts = []
        pprime = self.p.derivative()
        pmono = self.p.to_monomial()
        for sign in (1.0, -1.0):
            c = pmono.copy()
            c[0] -= sign
            if np.max(np.abs(c)) == 0.0:
                continue
            roots = np.polynomial.polynomial.polyroots(c)
            for r in roots:
                if abs(r.imag) > 1e-7 * (1.0 + abs(r.real)):
                    continue
                y0 = float(r.real)
                if y0 <= 1e-9 or y0 > upto * (1.0 + 1e-9):
                    continue
                # polish: touch points are extrema of p, crossings are not
                y1 = y0
                dp = pprime(y1)
                if abs(dp) < 1e-6 * self.K.coefficient_scale:
                    y1 = _newton(pprime, pprime.derivative(), y1)
                else:
                    y1 = _newton_offset(self.p, pprime, sign, y1)
                if 0 < y1 <= upto * (1.0 + 1e-9):
                    pts.append((y1, sign))
        pts.sort()
        # merge duplicates from the two sign families / conjugate pairs
        merged = []
        for y0, sign in pts:
            if merged and abs(y0 - merged[-1][0]) < 1e-7 * (1.0 + y0):
                continue
            merged.append((y0, sign))
        return merged

    @property
    def y_star(self):
        if self._threshold is None:
            self._threshold = self._compute_threshold()
        return self._threshold

    def _compute_threshold(self):
        p = self.p
        if p.degree <= 0:
            # constant trace: stable everywhere iff K is really +-I
            return math.inf if self.K.is_identity(tol=0.0) else 0.0
        cap = self.scan_cap
        step = min(1e-4 * 2 * self.m_inferred, cap / 1000.0)
        ys = np.arange(step, cap + step, step)
        vals = self._p_abs_minus_one(ys)
        if not np.all(np.isfinite(vals)):
            raise StabilityError("non-finite stability polynomial values")
        bad = np.nonzero(vals > 0.0)[0]
        y_cross = math.inf
        if bad.size:
            lo = ys[bad[0]] - step
            hi = ys[bad[0]]
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if self._p_abs_minus_one(mid) > 0.0:
                    hi = mid
                else:
                    lo = mid
                if hi - lo < 1e-10:
                    break
            y_cross = 0.5 * (lo + hi)
        # |p| = 1 touch points below the crossing can still be unstable
        # (non-diagonalizable K) even though |p| never exceeds 1 there
        y_touch = math.inf
        for y0, sign in self._touch_points(min(y_cross, cap)):
            if not self._matrix_is_pm_identity(y0, sign):
                y_touch = y0
                break
        y_star = min(y_cross, y_touch)
        return math.inf if y_star > cap else y_star

    @property
    def nodes(self):
        """Branch-increment points: |p|=1 points where sin(phi) flips sign."""
        if self._nodes is None:
            self._classify_nodes()
        return self._nodes

    @property
    def touch_nodes(self):
        if self._all_touch is None:
            self._classify_nodes()
        return self._all_touch

    def _classify_nodes(self):
        ystar = self.y_star
        upto = min(ystar * (1.0 - 1e-12), self.scan_cap) if math.isfinite(ystar) \
            else self.scan_cap
        crossings = []
        touches = []
        for y0, _sign in self._touch_points(upto):
            if y0 >= ystar * (1.0 - 1e-9):
                continue
            h = max(1e-7, 1e-7 * y0)
            left = self.K.k2(y0 - h)
            right = self.K.k2(y0 + h)
            touches.append(y0)
            if left * right < 0.0:
                crossings.append(y0)
        self._nodes = np.asarray(crossings)
        self._all_touch = np.asarray(touches)

    def practical_threshold(self, tol=1e-6):
        """Largest Y with |p(y)| <= 1 + tol for all y in [0, Y]."""
        if tol not in self._practical:
            cap = self.scan_cap
            step = min(1e-4 * 2 * self.m_inferred, cap / 1000.0)
            ys = np.arange(step, cap + step, step)
            vals = self._p_abs_minus_one(ys) - tol
            bad = np.nonzero(vals > 0.0)[0]
            if bad.size == 0:
                self._practical[tol] = math.inf
            else:
                lo = ys[bad[0]] - step
                hi = ys[bad[0]]
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    if abs(self.p(mid)) - 1.0 > tol:
                        hi = mid
                    else:
                        lo = mid
                self._practical[tol] = 0.5 * (lo + hi)
        return self._practical[tol]

    # -- extended-precision Taylor data ----------------------------------

    @property
    def series(self):
        if self._series is None:
            self._series = self._build_series()
        return self._series

    def _build_series(self):
        import mpmath as mp
        n = max(_SERIES_TERMS, self.p.coeffs.size + 8)
        with mp.workdps(_series.DPS):
            P = _series.from_double(self.p.coeffs, n)
            # 1 - P^2 = z * S2(z); S2(0) > 0 is required for stability at 0+
            S = _series.sub(_series.from_double([1.0], n), _series.mul(P, P))
            if abs(S[0]) > 1e-30:
                raise StabilityError("p(0) != 1, matrix is not a consistent step")
            S2 = _series.shift_down(S, 1)
            if S2[0] <= 0:
                raise StabilityError(
                    "p has |p| > 1 immediately right of 0; empty stability interval")
            sigma = _series.sqrt(S2)          # sin(phi) = y * sigma(y^2)
            inv_sigma = _series.reciprocal(sigma)
            # p'(y) = y * U(z) with U_j = 2 (j+1) p_{j+1}
            U = [mp.mpf(0)] * n
            for j in range(self.p.coeffs.size - 1):
                U[j] = 2 * (j + 1) * mp.mpf(float(self.p.coeffs[j + 1]))
            W = _series.mul(_series.scale(U, -1), inv_sigma)   # phi'(y), even
            Phi = [W[j] / (2 * j + 1) for j in range(n)]        # phi = y*Phi(z)
            G = list(Phi)
            G[0] -= 1                                           # phi - y = y*G(z)
            # eps = y * (Dt/sigma), with d = (K1-K4)/2 = z * Dt(z)
            D = _series.from_double(self.d.coeffs, n + 1)
            if abs(D[0]) > 1e-30 * max(1.0, self.K.coefficient_scale):
                raise StabilityError("K1(0) != K4(0), matrix is not a valid step")
            Dt = _series.shift_down(D, 1)[:n]
            E = _series.mul(Dt, inv_sigma)
            # gamma = K2/(y sigma) = G2(z)/sigma
            G2 = _series.from_double(self.K.k2.coeffs, n)
            Gam = _series.mul(G2, inv_sigma)
            if Gam[0] <= 0:
                raise StabilityError("gamma(0) <= 0; not a stable canonical form")
            inv_gam = _series.reciprocal(Gam)
            zE2 = [mp.mpf(0)] + _series.mul(E, E)[: n - 1]
            one = _series.from_double([1.0], n)
            Delta = _series.sub(
                _series.add(Gam, _series.mul(_series.add(one, zE2), inv_gam)),
                _series.from_double([2.0], n))
            return _SeriesData(G, Delta, Gam, E, sigma)

    def phase_order(self):
        """Order r with phi(y) - y = O(y^(r+1)), from cleaned Taylor data."""
        if self.K.is_identity(tol=0.0):
            return 0          # phi == 0, so phi - y = -y
        j = self.series.lead_G
        return math.inf if j is None else 2 * j

    def amplitude_order(self):
        """Order r with ||E(y)|| = O(y^r)."""
        if self.K.is_identity(tol=0.0):
            return math.inf   # E == 0 identically
        j = self.series.lead_Delta
        return math.inf if j is None else j

    # -- evaluation -------------------------------------------------------

    def _branch(self, yabs):
        nodes = self.nodes
        if nodes.size == 0:
            return np.zeros_like(yabs, dtype=int) if isinstance(yabs, np.ndarray) else 0
        return np.searchsorted(nodes, yabs, side="right")

    def phi(self, yabs):
        """Unwrapped phase, continuous with phi(y_j) = j*pi at the nodes."""
        lvl = self._branch(yabs)
        sgn = np.where(lvl % 2 == 0, 1.0, -1.0)
        arg = np.clip(sgn * self.p(yabs), -1.0, 1.0)
        return lvl * np.pi + np.arccos(arg)

    def phase_error(self, yabs):
        """phi(y) - y, series-backed below the switch radius."""
        yabs = np.asarray(yabs, dtype=float)
        out = np.empty_like(yabs)
        sw = self.series.y_switch(self)
        small = yabs < sw
        if np.any(small):
            ys = yabs[small]
            out[small] = ys * self.series.eval_G(ys * ys)
        if np.any(~small):
            yl = yabs[~small]
            out[~small] = self.phi(yl) - yl
        return out

    def eps_gamma_delta_enorm(self, yabs):
        """(eps, gamma, delta, Enorm) on |y| < y*, arrays in and out."""
        yabs = np.asarray(yabs, dtype=float)
        sw = self.series.y_switch(self)
        eps = np.empty_like(yabs)
        gam = np.empty_like(yabs)
        dlt = np.empty_like(yabs)
        small = yabs < sw
        if np.any(small):
            z = yabs[small] ** 2
            eps[small] = yabs[small] * self.series.eval_E(z)
            gam[small] = self.series.eval_Gam(z)
            dlt[small] = np.maximum(self.series.eval_Delta(z), 0.0)
        if np.any(~small):
            yl = yabs[~small]
            phi = self.phi(yl)
            s = np.sin(phi)
            k1 = self.K.k1(yl)
            k2 = self.K.k2(yl)
            k4 = self.K.k4(yl)
            tiny = np.abs(s) < 1e-13
            if np.any(tiny):
                for y0 in np.atleast_1d(yl[tiny]):
                    sign = 1.0 if self.p(y0) > 0 else -1.0
                    if not self._matrix_is_pm_identity(y0, sign):
                        raise NearResonanceError(
                            f"sin(phi) ~ 0 at y={y0!r} with K != +-I", y=y0)
                s_safe = np.where(tiny, 1.0, s)
                e_ = np.where(tiny, 0.0, (k1 - k4) / (2.0 * s_safe))
                g_ = np.where(tiny, 1.0, k2 / s_safe)
            else:
                e_ = (k1 - k4) / (2.0 * s)
                g_ = k2 / s
            eps[~small] = e_
            gam[~small] = g_
            dlt[~small] = np.maximum(g_ + (1.0 + e_ * e_) / g_ - 2.0, 0.0)
        enorm = _enorm_from_delta(dlt)
        return eps, gam, dlt, enorm


class _SeriesData:
    """Cleaned double views of the mpmath Taylor data, plus lead exponents."""

    def __init__(self, G, Delta, Gam, E, sigma):
        self.G = np.array(_series.to_double(G))
        self.Delta = np.array(_series.to_double(Delta))
        self.Gam = np.array(_series.to_double(Gam))
        self.E = np.array(_series.to_double(E))
        self.sigma = np.array(_series.to_double(sigma))
        self.lead_G = _lead_index(self.G, _ORDER_TOL)
        self.lead_Delta = _lead_index(self.Delta, _ORDER_TOL ** 2)
        self._switch = None

    def y_switch(self, ctx):
        if self._switch is None:
            r = _series_radius(self.G, self.Delta, self.Gam)
            sw = 0.7 * math.sqrt(r) if math.isfinite(r) else math.inf
            if ctx.touch_nodes.size:
                sw = min(sw, 0.9 * ctx.touch_nodes[0])
            if math.isfinite(ctx.y_star):
                sw = min(sw, 0.9 * ctx.y_star)
            self._switch = sw
        return self._switch

    def eval_G(self, z):
        return _series.eval_double(self.G, z)

    def eval_Delta(self, z):
        return _series.eval_double(self.Delta, z)

    def eval_Gam(self, z):
        return _series.eval_double(self.Gam, z)

    def eval_E(self, z):
        return _series.eval_double(self.E, z)


def _lead_index(coeffs, tol):
    scale = max(1.0, np.max(np.abs(coeffs)))
    for j, c in enumerate(coeffs):
        if abs(c) > tol * scale:
            return j
    return None


def _series_radius(*series_list):
    """Crude convergence-radius estimate from coefficient growth (in z)."""
    r = math.inf
    for c in series_list:
        n = len(c)
        for j in range(max(2, n // 2), n):
            if c[j] != 0.0:
                r = min(r, abs(c[j]) ** (-1.0 / j))
    return r


def _enorm_from_delta(delta):
    """Euclidean norm of the amplitude-error matrix as a function of delta."""
    delta = np.maximum(delta, 0.0)
    return np.sqrt(delta * (1.0 + 0.5 * delta + np.sqrt(delta + 0.25 * delta * delta)))


def _newton(f, fprime, x0, iters=60):
    x = x0
    for _ in range(iters):
        d = fprime(x)
        if d == 0.0:
            break
        step = f(x) / d
        x -= step
        if abs(step) < 1e-15 * (1.0 + abs(x)):
            break
    return x


def _newton_offset(p, pprime, sign, x0, iters=60):
    x = x0
    for _ in range(iters):
        d = pprime(x)
        if d == 0.0:
            break
        step = (p(x) - sign) / d
        x -= step
        if abs(step) < 1e-15 * (1.0 + abs(x)):
            break
    return x


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def stability_threshold(K: PropagationMatrix) -> float:
    """Largest Y such that K(y) is stable for all |y| < Y.

    Stability fails where |p(y)| > 1, or where |p(y)| = 1 with K != +-I
    (non-diagonalizable).  Scanning is capped at 4m for an inferred stage
    count m; a matrix stable throughout the cap returns math.inf.
    """
    return K.ctx.y_star


def phase_amplitude(K: PropagationMatrix, y):
    """(phi, eps, gamma, delta, Enorm) at scalar or array y, |y| < y*.

    phi is unwrapped to be continuous and odd with phi(y_j) = j*pi at the
    resonance nodes; eps is odd, gamma even.  delta >= 0 measures the
    distance of the canonical frame from orthogonal, and Enorm is the
    Euclidean norm of the amplitude-error matrix built from (eps, gamma).
    """
    ctx = K.ctx
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    if K.is_identity(tol=0.0):
        # K^n = I for every y: zero phase, orthogonal frame, no error matrix
        zeros = np.zeros_like(y_arr)
        out = (zeros, zeros, np.ones_like(y_arr), zeros, zeros)
        return tuple(float(v[0]) for v in out) if scalar else out
    zero = y_arr == 0.0
    if np.all(zero):
        out = (np.zeros_like(y_arr), np.zeros_like(y_arr),
               np.ones_like(y_arr), np.zeros_like(y_arr), np.zeros_like(y_arr))
        return tuple(float(v[0]) for v in out) if scalar else out
    if np.any((np.abs(y_arr) >= ctx.y_star) & ~zero):
        raise StabilityError(
            f"|y| >= y* = {ctx.y_star:.6g}; phase functions are undefined there")
    yabs = np.abs(y_arr)
    sgn = np.sign(y_arr)
    phi = (ctx.phase_error(yabs) + yabs) * sgn
    eps, gam, dlt, enorm = ctx.eps_gamma_delta_enorm(yabs)
    eps = eps * sgn
    if np.any(zero):
        phi = np.where(zero, 0.0, phi)
        eps = np.where(zero, 0.0, eps)
        gam = np.where(zero, 1.0, gam)
        dlt = np.where(zero, 0.0, dlt)
        enorm = np.where(zero, 0.0, enorm)
    if scalar:
        return (float(phi[0]), float(eps[0]), float(gam[0]),
                float(dlt[0]), float(enorm[0]))
    return phi, eps, gam, dlt, enorm


def _sup_on_grid(f, theta, n_grid, limit0):
    """Global sup of f on (0, theta] from a dense grid + golden refinement."""
    ys = np.linspace(theta / n_grid, theta, n_grid)
    vals = f(ys)
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo = ys[i - 1] if i > 0 else ys[0] * 0.5
    hi = ys[i + 1] if i + 1 < n_grid else theta
    # golden-section refinement of the bracket around the grid argmax
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = float(f(np.array([c]))[0])
    fd = float(f(np.array([d]))[0])
    while b - a > 1e-6 * max(theta * 1e-3, 0.5 * (a + b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = float(f(np.array([c]))[0])
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = float(f(np.array([d]))[0])
    best = max(best, fc, fd)
    if limit0 is not None:
        best = max(best, limit0)
    return best


def error_coefficients(K: PropagationMatrix, theta: float, ks):
    """Sup-type error coefficients mu_k(theta), nu_k(theta) for k in ks.

    mu_k = sup_{0<y<=theta} |phi(y)/y - 1| (theta/y)^k and nu_k the same
    weighting of Enorm.  Requires 0 < theta < y*.  For k above the
    detected order the sup diverges as y -> 0; math.inf is returned with
    a warning instead of raising.
    """
    ctx = K.ctx
    if not 0.0 < theta < ctx.y_star:
        raise StabilityError(
            f"need 0 < theta < y* = {ctx.y_star:.6g}, got theta = {theta}")
    ks = [int(k) for k in (ks if np.iterable(ks) else [ks])]
    if any(k < 0 for k in ks):
        raise ValueError("error-coefficient index k must be >= 0")
    if K.is_identity(tol=0.0):
        # phi == 0: |phi/y - 1| is identically 1, and E vanishes
        mu = {}
        for k in ks:
            if k > 0:
                warnings.warn(f"mu_{k} diverges: phase order is 0")
            mu[k] = 1.0 if k == 0 else math.inf
        return mu, {k: 0.0 for k in ks}
    r_phi = ctx.phase_order()
    r_amp = ctx.amplitude_order()
    sdata = ctx.series
    n_grid = max(20000, 500 * ctx.m_inferred)
    mu, nu = {}, {}
    for k in ks:
        if k > r_phi:
            warnings.warn(f"mu_{k} diverges: phase order is {r_phi}")
            mu[k] = math.inf
        else:
            def f_mu(y, k=k):
                return np.abs(ctx.phase_error(y)) * theta ** k / y ** (k + 1)
            if k < r_phi:
                lim = 0.0
            else:
                lim = abs(sdata.G[sdata.lead_G]) * theta ** k
            mu[k] = _sup_on_grid(f_mu, theta, n_grid, lim)
        if k > r_amp:
            warnings.warn(f"nu_{k} diverges: amplitude order is {r_amp}")
            nu[k] = math.inf
        else:
            def f_nu(y, k=k):
                enorm = ctx.eps_gamma_delta_enorm(y)[3]
                return enorm * (theta / y) ** k
            if k < r_amp:
                lim = 0.0
            else:
                lim = math.sqrt(abs(sdata.Delta[sdata.lead_Delta])) * theta ** k
            nu[k] = _sup_on_grid(f_nu, theta, n_grid, lim)
    return mu, nu


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

class StabilityReport:
    """Sampled phase/amplitude curves plus the summary scalars."""

    columns = ("y", "p", "q", "phi", "eps", "gamma", "delta", "Enorm")

    def __init__(self, y_star, theta, samples, mu, nu, order_estimate,
                 practical_threshold=None):
        self.y_star = y_star
        self.theta = theta
        self.samples = samples          # (n, 8) array, columns as above
        self.mu = mu
        self.nu = nu
        self.order_estimate = order_estimate
        self.practical_threshold = practical_threshold

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.samples:
            lines.append(",".join(f"{v:.17g}" for v in row))
        lines.append(f"# y_star={_fmt(self.y_star)}")
        lines.append(f"# theta={_fmt(self.theta)}")
        lines.append(f"# order_estimate={self.order_estimate}")
        for k in sorted(self.mu):
            lines.append(f"# mu_{k}={_fmt(self.mu[k])}")
        for k in sorted(self.nu):
            lines.append(f"# nu_{k}={_fmt(self.nu[k])}")
        if self.practical_threshold is not None:
            lines.append(f"# practical_threshold={_fmt(self.practical_threshold)}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    return "inf" if math.isinf(v) else f"{v:.17g}"


def analyze(K: PropagationMatrix, theta: float, ks=(0,), n_samples=512,
            practical=False) -> StabilityReport:
    """Sample the phase/amplitude curves on (0, theta] and summarize."""
    ctx = K.ctx
    if not 0.0 < theta < ctx.y_star:
        raise StabilityError(
            f"need 0 < theta < y* = {ctx.y_star:.6g}, got theta = {theta}")
    ys = np.linspace(theta / n_samples, theta, n_samples)
    phi, eps, gam, dlt, enorm = phase_amplitude(K, ys)
    q = q_polynomial(K)
    table = np.column_stack([ys, ctx.p(ys), q(ys), phi, eps, gam, dlt, enorm])
    mu, nu = error_coefficients(K, theta, ks)
    r_phi = ctx.phase_order()
    order = int(r_phi) if math.isfinite(r_phi) else math.inf
    pt = ctx.practical_threshold() if practical else None
    return StabilityReport(ctx.y_star, theta, table, mu, nu, order,
                           practical_threshold=pt)
