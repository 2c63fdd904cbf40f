"""Parity-compressed real polynomials in one variable.

Entries of a splitting propagation matrix are even or odd polynomials in
y, so only coefficients of matching-parity powers are stored: index j of
an even polynomial multiplies y^(2j), of an odd one y^(2j+1).  Arithmetic
follows the parity algebra (even*even = odd*odd = even, even*odd = odd).
"""

from __future__ import annotations

import numpy as np

EVEN = "even"
ODD = "odd"


class ParityPolynomial:
    """Real polynomial with pure even or pure odd powers of y."""

    __slots__ = ("coeffs", "parity")

    def __init__(self, coeffs, parity):
        if parity not in (EVEN, ODD):
            raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if c.ndim != 1:
            raise ValueError("coefficient array must be one-dimensional")
        if c.size == 0:
            c = np.zeros(1)
        self.coeffs = c
        self.parity = parity

    # -- construction -------------------------------------------------

    @classmethod
    def zero(cls, parity):
        return cls([0.0], parity)

    @classmethod
    def from_monomial(cls, coeffs, parity=None, tol=0.0):
        """Build from full ascending monomial coefficients.

        If parity is given, coefficients of the other parity must not
        exceed tol (relative to the largest coefficient).
        """
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        scale = np.max(np.abs(c)) if c.size else 0.0
        even_part = c[0::2]
        odd_part = c[1::2]
        if parity is None:
            parity = EVEN if np.max(np.abs(odd_part), initial=0.0) <= np.max(
                np.abs(even_part), initial=0.0) * 1e-300 else ODD
            # ambiguous input: require one side to vanish exactly
            if np.any(even_part) and np.any(odd_part):
                raise ValueError("mixed-parity coefficients; pass parity explicitly")
            parity = EVEN if np.any(even_part) or not np.any(odd_part) else ODD
        keep, drop = (even_part, odd_part) if parity == EVEN else (odd_part, even_part)
        bad = np.max(np.abs(drop), initial=0.0)
        if bad > tol * max(scale, 1e-300):
            raise ValueError(
                f"coefficients violate {parity} parity (residual {bad:.3e})")
        return cls(keep if keep.size else [0.0], parity)

    # -- queries -------------------------------------------------------

    @property
    def degree(self):
        """Degree in y, ignoring trailing zero coefficients (-1 for zero)."""
        nz = np.nonzero(self.coeffs)[0]
        if nz.size == 0:
            return -1
        j = nz[-1]
        return 2 * j if self.parity == EVEN else 2 * j + 1

    def is_zero(self, tol=0.0):
        return np.max(np.abs(self.coeffs)) <= tol

    def __call__(self, y):
        """Evaluate at scalar or ndarray y (Horner in z = y^2)."""
        y = np.asarray(y, dtype=float)
        z = y * y
        acc = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        if self.parity == ODD:
            acc = acc * y
        return acc if acc.ndim else float(acc)

    def to_monomial(self):
        """Full ascending monomial coefficient array."""
        n = self.coeffs.size
        out = np.zeros(2 * n if self.parity == ODD else 2 * n - 1)
        start = 1 if self.parity == ODD else 0
        out[start::2] = self.coeffs
        return out

    # -- arithmetic ----------------------------------------------------

    def _check_same_parity(self, other):
        if self.parity != other.parity:
            raise ValueError("cannot add polynomials of opposite parity")

    def __add__(self, other):
        self._check_same_parity(other)
        n = max(self.coeffs.size, other.coeffs.size)
        c = np.zeros(n)
        c[: self.coeffs.size] += self.coeffs
        c[: other.coeffs.size] += other.coeffs
        return ParityPolynomial(c, self.parity)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return ParityPolynomial(-self.coeffs, self.parity)

    def scaled(self, alpha):
        return ParityPolynomial(self.coeffs * float(alpha), self.parity)

    def __mul__(self, other):
        if not isinstance(other, ParityPolynomial):
            return self.scaled(other)
        prod = np.convolve(self.coeffs, other.coeffs)
        if self.parity == ODD and other.parity == ODD:
            # y^(2i+1) * y^(2j+1) = y^(2(i+j+1)): shift up one z-slot
            return ParityPolynomial(np.concatenate(([0.0], prod)), EVEN)
        if self.parity == EVEN and other.parity == EVEN:
            return ParityPolynomial(prod, EVEN)
        return ParityPolynomial(prod, ODD)

    __rmul__ = __mul__

    def derivative(self):
        """d/dy; the parity flips."""
        if self.parity == EVEN:
            # d/dy sum c_j y^(2j) = sum 2j c_j y^(2j-1)
            j = np.arange(self.coeffs.size)
            c = (2 * j * self.coeffs)[1:]
            return ParityPolynomial(c if c.size else [0.0], ODD)
        j = np.arange(self.coeffs.size)
        c = (2 * j + 1) * self.coeffs
        return ParityPolynomial(c, EVEN)

    def trimmed(self, tol=0.0):
        """Drop trailing coefficients with |c| <= tol * max|c|."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0.0:
            return ParityPolynomial([0.0], self.parity)
        keep = np.nonzero(np.abs(self.coeffs) > tol * scale)[0]
        if keep.size == 0:
            return ParityPolynomial([0.0], self.parity)
        return ParityPolynomial(self.coeffs[: keep[-1] + 1], self.parity)

    def __repr__(self):
        return f"ParityPolynomial({self.coeffs.tolist()}, {self.parity!r})"


def monomial_mul(a, b):
    """Convolve two full monomial coefficient arrays."""
    return np.convolve(np.asarray(a, float), np.asarray(b, float))
