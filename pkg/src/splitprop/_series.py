"""Truncated power-series arithmetic in extended precision.

Series are lists of mpmath.mpf coefficients in an auxiliary variable z
(z = y^2 throughout the package), truncated to a fixed number of terms.
Extended precision matters: the leading coefficients of phase-error and
amplitude-error expansions of high-order methods sit many orders of
magnitude below double-precision cancellation noise.
"""

from __future__ import annotations

import mpmath as mp

DPS = 50


def from_double(coeffs, n_terms):
    """Series from double coefficients, zero-padded/truncated to n_terms."""
    out = [mp.mpf(0)] * n_terms
    for j, c in enumerate(coeffs[:n_terms]):
        out[j] = mp.mpf(float(c))
    return out


def mul(a, b):
    n = len(a)
    out = [mp.mpf(0)] * n
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(n - i):
            bj = b[j]
            if bj != 0:
                out[i + j] += ai * bj
    return out


def add(a, b):
    return [x + y for x, y in zip(a, b)]


def sub(a, b):
    return [x - y for x, y in zip(a, b)]


def scale(a, alpha):
    alpha = mp.mpf(alpha)
    return [alpha * x for x in a]


def reciprocal(a):
    """1/a for a series with nonzero constant term."""
    n = len(a)
    if a[0] == 0:
        raise ZeroDivisionError("series reciprocal needs nonzero constant term")
    out = [mp.mpf(0)] * n
    out[0] = 1 / a[0]
    for k in range(1, n):
        s = mp.mpf(0)
        for j in range(1, k + 1):
            s += a[j] * out[k - j]
        out[k] = -s / a[0]
    return out


def sqrt(a):
    """sqrt(a) for a series with positive constant term."""
    n = len(a)
    if a[0] <= 0:
        raise ValueError("series sqrt needs positive constant term")
    out = [mp.mpf(0)] * n
    out[0] = mp.sqrt(a[0])
    inv2s0 = 1 / (2 * out[0])
    for k in range(1, n):
        s = mp.mpf(0)
        for j in range(1, k):
            s += out[j] * out[k - j]
        out[k] = (a[k] - s) * inv2s0
    return out


def shift_down(a, places):
    """Divide by z^places; the dropped coefficients must be ~zero."""
    return a[places:] + [mp.mpf(0)] * places


def to_double(a):
    return [float(x) for x in a]


def eval_double(coeffs, z):
    """Horner evaluation of double coefficients at scalar/array z."""
    acc = 0.0 * z
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc
