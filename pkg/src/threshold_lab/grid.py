"""Uniform radial grid, quadrature, radial differential operators, and norms.

Discretization conventions (documented deviations from a plain second-order
vertex scheme; chosen so the certification residuals in the test suite are
reachable):

* cell-centered nodes r_j = (j + 1/2) h, h = Rmax / M -- no node sits at the
  coordinate singularity r = 0, and even reflection across the origin is exact
  for the ghost points;
* fourth-order five-point stencils for d/dr and d^2/dr^2, with even reflection
  at the origin (radial functions extend evenly) and homogeneous Dirichlet
  beyond Rmax;
* quadrature = midpoint rule on the full integrand |S^{N-1}| r^{N-1} f(r) with
  Euler-Maclaurin end corrections, giving errors far below the certification
  tolerances for smooth decaying fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import GridError, HankelUnsupported

__all__ = ["RadialGrid", "RadialField", "make_grid", "default_rmax"]

_END_STENCIL_POINTS = 6


def surface_area(N: int) -> float:
    """|S^{N-1}|, the surface measure of the unit sphere in R^N."""
    from scipy.special import gamma

    return float(2 * np.pi ** (N / 2) / gamma(N / 2))


def default_rmax(omega: float) -> float:
    """Default domain size: >= 40 e-foldings of the e^{-sqrt(omega) r} tail."""
    return 40.0 / np.sqrt(omega)


def _quadrature_weights(N: int, M: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    r = (np.arange(M) + 0.5) * h
    geom = surface_area(N) * r ** (N - 1)
    w = geom * h
    # Euler-Maclaurin end corrections for the midpoint rule acting on the full
    # integrand g = |S^{N-1}| r^{N-1} f: the midpoint sum errs by
    # -(h^2/24) g' + (7 h^4/5760) g''' at each end; approximate the derivatives
    # with one-sided polynomial stencils on the first/last nodes.
    n = _END_STENCIL_POINTS
    x = np.arange(n) + 0.5
    ainv = np.linalg.inv(np.vander(x, n, increasing=True))
    c1 = ainv[1, :]
    c3 = 6 * ainv[3, :]
    corr = -(h / 24) * c1 + (7 * h / 5760) * c3
    w = w.copy()
    w[:n] += corr * geom[:n]
    w[-n:] += corr[::-1] * geom[-n:]
    return r, w


def _diff_matrices(M: int, h: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12 * h)
    rows, cols, v2, v1 = [], [], [], []
    for j in range(M):
        for k in range(5):
            idx = j + k - 2
            if idx < 0:
                idx = -idx - 1  # even reflection across r = 0
            if idx >= M:
                continue  # Dirichlet beyond Rmax
            rows.append(j)
            cols.append(idx)
            v2.append(c2[k])
            v1.append(c1[k])
    shape = (M, M)
    D2 = sp.coo_matrix((v2, (rows, cols)), shape=shape).tocsr()
    D1 = sp.coo_matrix((v1, (rows, cols)), shape=shape).tocsr()
    D2.sum_duplicates()
    D1.sum_duplicates()
    return D2, D1


class RadialGrid:
    """Uniform cell-centered radial grid with quadrature and operators."""

    def __init__(self, N: int, M: int, Rmax: float):
        if M < 8:
            raise GridError(f"grid needs M >= 8 nodes, got {M}")
        if Rmax <= 0:
            raise GridError(f"Rmax must be positive, got {Rmax}")
        self.N = int(N)
        self.M = int(M)
        self.Rmax = float(Rmax)
        self.h = self.Rmax / self.M
        self.r, self.w = _quadrature_weights(self.N, self.M, self.h)
        D2, D1 = _diff_matrices(self.M, self.h)
        self.d1_matrix = D1
        self.lap_matrix = (D2 + sp.diags((self.N - 1) / self.r) @ D1).tocsr()

    def __eq__(self, other):
        return (
            isinstance(other, RadialGrid)
            and (self.N, self.M, self.Rmax) == (other.N, other.M, other.Rmax)
        )

    def __hash__(self):
        return hash((self.N, self.M, self.Rmax))

    def __repr__(self):
        return f"RadialGrid(N={self.N}, M={self.M}, Rmax={self.Rmax:g})"

    # -- quadrature and calculus ------------------------------------------

    def integrate(self, f: np.ndarray):
        """Integral of a radial sample vector over R^N."""
        f = np.asarray(f)
        if f.shape != (self.M,):
            raise GridError(f"expected {self.M} samples, got shape {f.shape}")
        return np.sum(self.w * f)

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        """N-dimensional Laplacian of a radial sample vector."""
        values = np.asarray(values)
        if values.shape != (self.M,):
            raise GridError(f"expected {self.M} samples, got shape {values.shape}")
        return self.lap_matrix @ values

    def deriv(self, values: np.ndarray) -> np.ndarray:
        """Radial derivative of a sample vector."""
        return self.d1_matrix @ np.asarray(values)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.N, self.M * factor, self.Rmax)


@lru_cache(maxsize=32)
def make_grid(N: int, M: int, Rmax: float) -> RadialGrid:
    """Cached grid constructor (grids are immutable once built)."""
    return RadialGrid(N, M, Rmax)


@dataclass(frozen=True)
class RadialField:
    """Complex samples of a radial function on a RadialGrid."""

    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.M,):
            raise GridError(
                f"field length {vals.shape} does not match grid M={self.grid.M}"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("field contains non-finite samples")
        object.__setattr__(self, "values", vals)

    # -- arithmetic helpers ----------------------------------------------

    def _like(self, values) -> "RadialField":
        return RadialField(self.grid, values)

    def __add__(self, other):
        self._check(other)
        return self._like(self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.values - other.values)

    def __mul__(self, scalar):
        return self._like(self.values * scalar)

    __rmul__ = __mul__

    def _check(self, other):
        if not isinstance(other, RadialField) or other.grid != self.grid:
            raise GridError("fields live on different grids")

    # -- norms ------------------------------------------------------------

    def mass(self) -> float:
        return float(self.grid.integrate(np.abs(self.values) ** 2).real)

    def norm_l2(self) -> float:
        return float(np.sqrt(self.mass()))

    def norm_lp(self, q: float) -> float:
        return float(self.grid.integrate(np.abs(self.values) ** q).real ** (1 / q))

    def grad_sq(self) -> float:
        du = self.grid.deriv(self.values)
        return float(self.grid.integrate(np.abs(du) ** 2).real)

    def norm_h1dot(self) -> float:
        return float(np.sqrt(self.grad_sq()))

    def norm_h1(self) -> float:
        return float(np.sqrt(self.mass() + self.grad_sq()))


def norms(u: RadialField, p: float) -> tuple[float, float, float, float]:
    """(L2, L^{p+1}, homogeneous H1, full H1) norms of a field."""
    l2 = u.norm_l2()
    lp1 = u.norm_lp(p + 1)
    h1dot = u.norm_h1dot()
    return l2, lp1, h1dot, float(np.hypot(l2, h1dot))


def fractional_hs_norm(u: RadialField, s: float) -> float:
    """Homogeneous H^s norm via exact transform paths (N = 1 and N = 3 only).

    N=1: cosine transform of the even extension of u.
    N=3: sine transform of r*u(r).
    The cell-centered grid makes DCT-II/DST-II the natural transforms.
    """
    from scipy.fft import dct, dst

    g = u.grid
    if not 0 < s <= 1:
        raise GridError(f"fractional order s must lie in (0, 1], got {s}")
    vals = u.values
    if g.N == 1:
        coef_re = dct(vals.real, type=2, norm="ortho")
        coef_im = dct(vals.imag, type=2, norm="ortho")
        k = np.arange(g.M)
        xi = np.pi * k / g.Rmax
        # even extension doubles the line integral: |S^0| = 2 is the same factor
        total = 2 * g.h * np.sum(xi ** (2 * s) * (coef_re**2 + coef_im**2))
        return float(np.sqrt(total))
    if g.N == 3:
        v = g.r * vals
        coef_re = dst(v.real, type=2, norm="ortho")
        coef_im = dst(v.imag, type=2, norm="ortho")
        xi = np.pi * (np.arange(g.M) + 1) / g.Rmax
        total = 4 * np.pi * g.h * np.sum(xi ** (2 * s) * (coef_re**2 + coef_im**2))
        return float(np.sqrt(total))
    raise HankelUnsupported(f"exact transform path only for N in {{1, 3}}, got N={g.N}")
