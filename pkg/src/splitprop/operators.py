"""Matrix-free real-symmetric Hamiltonian actions and spectral estimates.

Provides the Fourier-collocation Schrodinger operator on a periodic
grid, the shifted tridiagonal test operator, dense wrappers, a spectral
radius estimator, and the H-power norms ||u||_k used by the a-priori
error bounds.

Two vector-norm conventions coexist: the grid-weighted one,
||u||^2 = u^T conj(u) / N, used for physical diagnostics, and the plain
Euclidean norm used in the propagation error bounds.  Norm helpers take
a `convention` flag; the grid-weighted form is the default.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

DISCRETE = "discrete"
EUCLIDEAN = "euclidean"

_POWER_SEED = 1742
_SAFETY = 1.01


class HamiltonianOperator:
    """Real-symmetric operator defined by its action on vectors.

    The action must accept real or complex (N,) arrays.  A nonzero
    `shift` means the action already computes (H - shift*I)v; the shift
    is recorded so callers can undo the spectrum translation.
    """

    def __init__(self, dim, apply, name="operator", shift=0.0):
        self.dim = int(dim)
        self._apply = apply
        self.name = name
        self.shift = float(shift)
        self._rho = None
        self._dense = None

    def __call__(self, v):
        return self._apply(v)

    def apply(self, v):
        return self._apply(v)

    @property
    def rho_estimate(self):
        """Cached spectral-radius upper estimate (computed on first use)."""
        if self._rho is None:
            self._rho = spectral_radius(self)
        return self._rho

    def shifted(self, sigma):
        """Operator computing (H - sigma I) v on top of this action."""
        def act(v, _s=float(sigma)):
            return self._apply(v) - _s * v
        return HamiltonianOperator(self.dim, act,
                                   name=f"{self.name}-shift{sigma:g}",
                                   shift=self.shift + float(sigma))

    def to_dense(self):
        """Assemble the dense matrix column by column (small N only)."""
        if self._dense is None:
            n = self.dim
            if n > 4096:
                raise ValueError(f"refusing to densify operator of size {n}")
            cols = np.empty((n, n))
            e = np.zeros(n)
            for j in range(n):
                e[j] = 1.0
                cols[:, j] = np.real(self._apply(e))
                e[j] = 0.0
            self._dense = 0.5 * (cols + cols.T)   # symmetrize roundoff
        return self._dense


@dataclass(frozen=True)
class GridSpec:
    """Periodic collocation grid for the 1-d Schrodinger operator."""
    n: int
    x_min: float
    x_max: float
    mu: float
    potential: object           # callable V(x) on ndarray

    def __post_init__(self):
        if self.n % 2 != 0 or self.n < 2:
            raise ValueError("grid size N must be even and >= 2")
        if not self.x_max > self.x_min:
            raise ValueError("empty grid interval")

    @property
    def x(self):
        length = self.x_max - self.x_min
        return self.x_min + length * np.arange(self.n) / self.n


def fourier_hamiltonian(grid: GridSpec) -> HamiltonianOperator:
    """H = F^-1 diag(kappa_n) F + diag(V(x_j)) on the periodic grid.

    kappa_n = (2 pi n / L)^2 / (2 mu) for n = -N/2 .. N/2-1, so the
    kinetic term keeps the physical units of the original interval.
    """
    n = grid.n
    length = grid.x_max - grid.x_min
    freq = np.fft.fftfreq(n, d=1.0 / n)       # 0..N/2-1, -N/2..-1
    kappa = (2.0 * np.pi * freq / length) ** 2 / (2.0 * grid.mu)
    v = np.asarray(grid.potential(grid.x), dtype=float)
    if v.shape != (n,) or not np.all(np.isfinite(v)):
        raise ValueError("potential must give finite values on the grid")

    def act(u):
        u = np.asarray(u)
        out = np.fft.ifft(kappa * np.fft.fft(u)) + v * u
        if not np.iscomplexobj(u):
            return out.real
        return out

    return HamiltonianOperator(n, act, name=f"fourier-N{n}")


def tridiagonal_operator(omega: float, n: int) -> HamiltonianOperator:
    """(omega/2) * tridiag(-1, 2, -1); eigenvalues fill (0, 2*omega)."""
    if n < 2:
        raise ValueError("tridiagonal operator needs N >= 2")
    if not omega > 0:
        raise ValueError("omega must be positive")
    half = 0.5 * float(omega)

    def act(u):
        u = np.asarray(u)
        out = 2.0 * u.astype(u.dtype, copy=True)
        out[:-1] -= u[1:]
        out[1:] -= u[:-1]
        return half * out

    return HamiltonianOperator(n, act, name=f"tridiag-w{omega:g}-N{n}")


def diagonal_operator(values) -> HamiltonianOperator:
    values = np.asarray(values, dtype=float)

    def act(u):
        return values * np.asarray(u)

    return HamiltonianOperator(values.size, act, name="diagonal")


def dense_operator(matrix, name="dense") -> HamiltonianOperator:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("need a square matrix")
    if not np.allclose(matrix, matrix.T, atol=1e-12 * max(1.0, np.abs(matrix).max())):
        raise ValueError("matrix is not symmetric")
    op = HamiltonianOperator(matrix.shape[0], lambda u: matrix @ u, name=name)
    op._dense = matrix
    return op


def spectral_radius(op: HamiltonianOperator, tol: float = 1e-6) -> float:
    """Largest |eigenvalue| estimate, inflated by a 1% safety factor.

    Uses a Krylov (implicitly restarted Lanczos) eigensolver from a
    fixed-seed start vector; plain power iteration on H^2 is the
    fallback when that fails to converge.  The inflation keeps the
    estimate on the safe side of the stability gate tau*rho < y*.
    """
    n = op.dim
    rng = np.random.default_rng(_POWER_SEED)
    v0 = rng.standard_normal(n)
    if n <= 64:
        # small problems: dense is exact and cheaper than iterating
        w = np.linalg.eigvalsh(op.to_dense())
        return _SAFETY * float(np.max(np.abs(w)))
    lin = LinearOperator((n, n), matvec=lambda u: op(u), dtype=float)
    try:
        w = eigsh(lin, k=1, which="LM", tol=tol, v0=v0,
                  maxiter=max(2000, 40 * n), return_eigenvectors=False)
        return _SAFETY * float(np.abs(w[0]))
    except Exception:
        warnings.warn(f"{op.name}: Krylov eigensolver failed; "
                      "falling back to power iteration on H^2")
    # power iteration on H^2 handles sign-indefinite spectra
    v = v0 / np.linalg.norm(v0)
    lam = 0.0
    for _ in range(10000):
        w = op(op(v))
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            break
        lam = lam_new
    else:
        warnings.warn(f"{op.name}: power iteration did not reach tol={tol}")
    return _SAFETY * float(np.sqrt(max(lam, 0.0)))


def vector_norm(u, convention=DISCRETE) -> float:
    u = np.asarray(u)
    nrm = float(np.linalg.norm(u))
    if convention == DISCRETE:
        return nrm / np.sqrt(u.size)
    if convention == EUCLIDEAN:
        return nrm
    raise ValueError(f"unknown norm convention {convention!r}")


def h_power_norm(op: HamiltonianOperator, u, k: int,
                 convention=DISCRETE) -> float:
    """||H^k u|| under the requested norm convention."""
    if k < 0:
        raise ValueError("power k must be >= 0")
    w = np.asarray(u)
    for _ in range(k):
        w = op(w)
    return vector_norm(w, convention)


# ---------------------------------------------------------------------------
# named potentials and problem configuration files
# ---------------------------------------------------------------------------

def poschl_teller_potential(mu: float, alpha: float, lam: float):
    """Attractive 1/cosh^2 well; lam sets the depth, alpha the range."""
    depth = alpha * alpha / (2.0 * mu) * lam * (lam - 1.0)

    def v(x):
        return -depth / np.cosh(alpha * np.asarray(x)) ** 2

    return v


def poschl_teller_bound_states(mu: float, alpha: float, lam: float):
    """Energies -(alpha^2/2mu)(lam-1-n)^2 for integer 0 <= n <= lam-1."""
    ns = np.arange(0, int(np.floor(lam - 1.0)) + 1)
    return -(alpha * alpha / (2.0 * mu)) * (lam - 1.0 - ns) ** 2


_POTENTIALS = {
    "zero": lambda **kw: (lambda x: np.zeros_like(np.asarray(x, dtype=float))),
    "constant": lambda c=0.0, **kw: (lambda x: np.full_like(np.asarray(x, dtype=float), float(c))),
    "poschl_teller": lambda mu=1745.0, alpha=2.0, lam=24.5, **kw:
        poschl_teller_potential(mu, alpha, lam),
}


def poschl_teller_grid(n=128, mu=1745.0, alpha=2.0, lam=24.5,
                       x_min=-5.0, x_max=5.0) -> GridSpec:
    return GridSpec(n=n, x_min=x_min, x_max=x_max, mu=mu,
                    potential=poschl_teller_potential(mu, alpha, lam))


def gaussian_state(grid: GridSpec, b=3.0, convention=DISCRETE):
    """exp(-b^2 x^2) on the grid, normalized under the given convention."""
    u = np.exp(-(b * b) * grid.x ** 2).astype(complex)
    return u / vector_norm(u, convention)


def load_problem(path):
    """Problem config JSON -> (operator, u0 or None, config dict).

    Schema: {"kind": "tridiagonal"|"fourier"|"diagonal", ...kind params,
             "shift": sigma?, "initial": {"type": "gaussian"|"random",
             "b"?: float, "seed"?: int}}
    """
    with open(path) as fh:
        cfg = json.load(fh)
    kind = cfg.get("kind")
    if kind == "tridiagonal":
        op = tridiagonal_operator(float(cfg["omega"]), int(cfg["N"]))
    elif kind == "fourier":
        pot_name = cfg.get("potential", "zero")
        if pot_name not in _POTENTIALS:
            raise ValueError(f"unknown potential {pot_name!r}")
        params = {k: cfg[k] for k in ("mu", "alpha", "lam", "c") if k in cfg}
        pot = _POTENTIALS[pot_name](**params)
        grid = GridSpec(n=int(cfg["N"]), x_min=float(cfg.get("x_min", -5.0)),
                        x_max=float(cfg.get("x_max", 5.0)),
                        mu=float(cfg.get("mu", 1.0)), potential=pot)
        op = fourier_hamiltonian(grid)
        cfg["_grid"] = grid
    elif kind == "diagonal":
        op = diagonal_operator(np.asarray(cfg["values"], dtype=float))
    else:
        raise ValueError(f"unknown operator kind {kind!r}")
    if cfg.get("shift"):
        op = op.shifted(float(cfg["shift"]))
    u0 = None
    init = cfg.get("initial")
    if init:
        if init.get("type") == "gaussian":
            if kind != "fourier":
                raise ValueError("gaussian initial state needs a fourier grid")
            u0 = gaussian_state(cfg["_grid"], b=float(init.get("b", 3.0)))
        elif init.get("type") == "random":
            rng = np.random.default_rng(int(init.get("seed", 42)))
            u0 = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
            u0 = u0 / np.linalg.norm(u0)
        else:
            raise ValueError(f"unknown initial state {init!r}")
    return op, u0, cfg
