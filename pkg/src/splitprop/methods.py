"""Splitting-method representation, validation, JSON files, and builtins.

A method is a pair of coefficient lists (a_i, b_i), i = 1..L.  Stage i
advances a harmonic-oscillator block by the shear pair B_i then A_i, and
stages are applied from i = L down to i = 1 within one time step.  A
trailing b_L = 0 marks a first-same-as-last (FSAL) method: the leading
shear of a step fuses with the trailing shear of the previous one, so
the effective per-step stage cost is L - 1.
"""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

_CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True)
class SplittingMethod:
    name: str
    m: int                      # nominal stage count (per-step cost unit)
    r: int                      # nominal order
    theta_prime: float          # design scaled step tau*rho/m
    a: tuple = field(default=())
    b: tuple = field(default=())

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        b = tuple(float(x) for x in self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if len(a) != len(b) or len(a) < 1:
            raise ValueError("a and b must be equal-length, nonempty lists")
        if not all(np.isfinite(a)) or not all(np.isfinite(b)):
            raise ValueError("non-finite coefficients")
        if self.m not in (len(a), len(a) - 1):
            warnings.warn(
                f"{self.name}: declared stage count m={self.m} does not match "
                f"{len(a)} coefficient pairs (expected m or m+1 pairs)")
        if self.m == len(a) - 1 and not self.fsal:
            raise ValueError(
                f"{self.name}: m+1 coefficient pairs require a trailing b = 0")
        sa, sb = sum(a), sum(b)
        if abs(sa - 1.0) > _CONSISTENCY_TOL or abs(sb - 1.0) > _CONSISTENCY_TOL:
            # order-zero designs need not be consistent, so warn only
            warnings.warn(
                f"{self.name}: consistency sums deviate from 1 "
                f"(sum a = {sa!r}, sum b = {sb!r})")

    @property
    def n_pairs(self) -> int:
        return len(self.a)

    @property
    def fsal(self) -> bool:
        return self.b[-1] == 0.0

    @property
    def stage_cost(self) -> int:
        """H-apply pairs per step once FSAL fusion is accounted for."""
        return self.n_pairs - 1 if self.fsal else self.n_pairs

    def describe(self) -> str:
        tag = ", FSAL" if self.fsal else ""
        return (f"{self.name}: m={self.m}, r={self.r}, "
                f"theta'={self.theta_prime:g}, {self.n_pairs} pairs{tag}")


def _coeff_out(x: float) -> str:
    return f"{x:.17g}"


def save_method(method: SplittingMethod, path) -> None:
    """Canonical JSON with coefficients as 17-significant-digit strings."""
    doc = {
        "name": method.name,
        "m": method.m,
        "r": method.r,
        "theta_prime": _coeff_out(method.theta_prime),
        "a": [_coeff_out(x) for x in method.a],
        "b": [_coeff_out(x) for x in method.b],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_method(path) -> SplittingMethod:
    """Read and validate a coefficient file written by save_method.

    Numbers may be JSON numbers or decimal strings; consistency-sum
    violations warn rather than fail.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    try:
        a = [float(x) for x in doc["a"]]
        b = [float(x) for x in doc["b"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: bad or missing coefficient arrays") from exc
    if len(a) != len(b):
        raise ValueError(
            f"{path}: length mismatch, {len(a)} a's vs {len(b)} b's")
    name = doc.get("name", "unnamed")
    m = int(doc.get("m", len(a)))
    r = int(doc.get("r", 0))
    theta_prime = float(doc.get("theta_prime", 1.0))
    return SplittingMethod(name=name, m=m, r=r, theta_prime=theta_prime,
                           a=tuple(a), b=tuple(b))


# ---------------------------------------------------------------------------
# builtin registry
# ---------------------------------------------------------------------------

_CONCAT_RE = re.compile(r"^leapfrog_concat\((\d+)\)$")


def builtin(name: str) -> SplittingMethod:
    """Named reference methods: leapfrog, strang, leapfrog_concat(m)."""
    if name == "leapfrog":
        return SplittingMethod("leapfrog", m=1, r=1, theta_prime=1.0,
                               a=(1.0,), b=(1.0,))
    if name == "strang":
        return SplittingMethod("strang", m=1, r=2, theta_prime=1.0,
                               a=(0.5, 0.5), b=(1.0, 0.0))
    match = _CONCAT_RE.match(name)
    if match:
        m = int(match.group(1))
        if m < 1:
            raise ValueError("leapfrog_concat needs m >= 1")
        c = 1.0 / m
        return SplittingMethod(name, m=m, r=1, theta_prime=1.0,
                               a=(c,) * m, b=(c,) * m)
    raise KeyError(f"unknown builtin method {name!r}; "
                   "try leapfrog, strang, or leapfrog_concat(m)")


def resolve_method(spec: str) -> SplittingMethod:
    """Builtin name or path to a JSON coefficient file."""
    try:
        return builtin(spec)
    except KeyError:
        pass
    return load_method(spec)
