"""Linearized operators around the standing wave and their spectrum.

L+ = -Delta + omega - p Q^{p-1},  L- = -Delta + omega - Q^{p-1}, and the block
operator  L = [[0, -L-], [L+, 0]]  acting on real pairs (h1, h2) identified
with the complex perturbation h = h1 + i h2.  The unique unstable mode solves
L+ Y1 = e0 Y2, L- Y2 = -e0 Y1 with e0 > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    GridError,
    NoUnstableEigenvalue,
    SingularResolvent,
)
from .grid import RadialField
from .groundstate import GroundState

__all__ = [
    "LinearizedOperator",
    "EigenPair",
    "assemble",
    "solve_eigenpair",
    "phi",
    "bform",
    "project_Gperp",
    "project_GperpPrime",
    "resolvent_solve",
    "e0_shooting_oracle",
]


@dataclass(frozen=True)
class LinearizedOperator:
    gs: GroundState
    Lplus: sp.spmatrix = field(repr=False)
    Lminus: sp.spmatrix = field(repr=False)

    @property
    def grid(self):
        return self.gs.grid

    def block(self) -> sp.spmatrix:
        M = self.grid.M
        Z = sp.csr_matrix((M, M))
        return sp.bmat([[Z, -self.Lminus], [self.Lplus, Z]], format="csc")

    def apply_block(self, h: np.ndarray) -> np.ndarray:
        """Apply L to a complex field viewed as the pair (Re h, Im h)."""
        h1, h2 = h.real, h.imag
        return (-(self.Lminus @ h2)) + 1j * (self.Lplus @ h1)


@dataclass(frozen=True)
class EigenPair:
    e0: float
    Y1: np.ndarray = field(repr=False)
    Y2: np.ndarray = field(repr=False)
    normalization: str  # "unitL2" | "dualB"
    kappa: float  # B(Y+, Y-) in the unit-L2 normalization
    res_plus: float  # relative residual of L+ Y1 = e0 Y2
    res_minus: float  # relative residual of L- Y2 = -e0 Y1
    spectral_gap: float  # separation of the next eigenvalue of L- L+
    minus_sign: float = 1.0  # sign carried by Y- under the dualB normalization

    @property
    def Yplus(self) -> np.ndarray:
        return self.Y1 + 1j * self.Y2

    @property
    def Yminus(self) -> np.ndarray:
        return self.minus_sign * (self.Y1 - 1j * self.Y2)

    def dual_normalized(self) -> "EigenPair":
        """Rescale so that B(Y+, Y-) = 1.

        Y+ and Y- are independent eigenfunctions (for +e0 and -e0) with
        independent real scalings; when kappa < 0 the sign is absorbed into
        the Y- scaling so that the cross pairing is +1.
        """
        s = np.sqrt(abs(self.kappa))
        return replace(
            self,
            Y1=self.Y1 / s,
            Y2=self.Y2 / s,
            normalization="dualB",
            minus_sign=self.minus_sign * float(np.sign(self.kappa)),
        )


def assemble(gs: GroundState) -> LinearizedOperator:
    grid = gs.grid
    A = grid.lap_matrix
    I = sp.identity(grid.M, format="csr")
    Qpm1 = np.abs(gs.Q) ** (gs.params.p - 1)
    Lp = (-A + gs.params.omega * I - sp.diags(gs.params.p * Qpm1)).tocsc()
    Lm = (-A + gs.params.omega * I - sp.diags(Qpm1)).tocsc()
    return LinearizedOperator(gs=gs, Lplus=Lp, Lminus=Lm)


def _wdot(w, a, b):
    return float(np.sum(w * a * b))


def solve_eigenpair(op: LinearizedOperator, *, coarse_M: int = 400) -> EigenPair:
    """Unstable eigenpair via shift-inverse iteration on L- L+.

    The real eigenvalue e0 > 0 of the block operator satisfies
    L- L+ Y1 = -e0^2 Y1 with -e0^2 the most negative eigenvalue of L- L+
    in the radial sector; a coarse dense solve locates the shift.
    """
    from .grid import make_grid
    from .groundstate import solve_ground_state

    gs = op.gs
    grid = gs.grid
    P = (op.Lminus @ op.Lplus).tocsc()

    coarse_grid = make_grid(grid.N, coarse_M, grid.Rmax)
    gs_c = solve_ground_state(gs.params, coarse_grid, use_cache=False)
    op_c = assemble(gs_c)
    ev = np.linalg.eigvals((op_c.Lminus @ op_c.Lplus).toarray())
    ev = np.sort(ev[np.abs(ev.imag) < 1e-8].real)
    neg = ev[ev < -1e-10]
    if neg.size == 0:
        raise NoUnstableEigenvalue(
            f"no negative eigenvalue of L-L+ at coarse resolution M={coarse_M}"
        )
    sigma = neg.max()
    gap = float(abs(neg[-2] - neg[-1])) if neg.size >= 2 else float(abs(ev[ev > 0].min() - sigma))

    lu = spla.splu(P - sigma * sp.identity(grid.M, format="csc"))
    x = np.exp(-grid.r**2)
    x /= np.linalg.norm(x)
    lam = sigma
    for _ in range(200):
        y = lu.solve(x)
        y /= np.linalg.norm(y)
        lam_new = y @ (P @ y) / (y @ y)
        converged = abs(lam_new - lam) < 1e-14 * abs(lam_new)
        x, lam = y, lam_new
        if converged:
            break
    if lam >= 0:
        raise NoUnstableEigenvalue(f"inverse iteration converged to lambda={lam:.3e} >= 0")

    e0 = float(np.sqrt(-lam))
    w = grid.w
    Y1 = x / np.sqrt(_wdot(w, x, x))
    Y2 = (op.Lplus @ Y1) / e0
    # sign convention: int(grad Q . grad Y1 + omega Q Y1) > 0
    sgn = _wdot(w, grid.deriv(gs.Q), grid.deriv(Y1)) + gs.params.omega * _wdot(w, gs.Q, Y1)
    if sgn < 0:
        Y1, Y2 = -Y1, -Y2
    # unit L2 on the pair
    nrm = np.sqrt(_wdot(w, Y1, Y1) + _wdot(w, Y2, Y2))
    Y1, Y2 = Y1 / nrm, Y2 / nrm

    rp = np.sqrt(_wdot(w, op.Lplus @ Y1 - e0 * Y2, op.Lplus @ Y1 - e0 * Y2))
    rp /= e0 * np.sqrt(_wdot(w, Y2, Y2))
    rm = np.sqrt(_wdot(w, op.Lminus @ Y2 + e0 * Y1, op.Lminus @ Y2 + e0 * Y1))
    rm /= e0 * np.sqrt(_wdot(w, Y1, Y1))

    pair = EigenPair(
        e0=e0, Y1=Y1, Y2=Y2, normalization="unitL2", kappa=0.0,
        res_plus=float(rp), res_minus=float(rm), spectral_gap=gap,
    )
    kappa = bform(pair.Yplus, pair.Yminus, op)
    return replace(pair, kappa=float(kappa))


def phi(h: np.ndarray | RadialField, op: LinearizedOperator) -> float:
    """Linearized energy Phi(h) = 1/2 [<L+ h1, h1> + <L- h2, h2>]."""
    if isinstance(h, RadialField):
        if h.grid != op.grid:
            raise GridError("field grid does not match operator grid")
        h = h.values
    h = np.asarray(h, dtype=complex)
    w = op.grid.w
    h1, h2 = h.real, h.imag
    return 0.5 * (_wdot(w, op.Lplus @ h1, h1) + _wdot(w, op.Lminus @ h2, h2))


def bform(g, h, op: LinearizedOperator) -> float:
    """Polarization of Phi; exactly symmetric by construction."""
    if isinstance(g, RadialField):
        g = g.values
    if isinstance(h, RadialField):
        h = h.values
    g = np.asarray(g, dtype=complex)
    h = np.asarray(h, dtype=complex)
    return 0.25 * (phi(g + h, op) - phi(g - h, op))


def _project_off(w, vec, basis):
    """Orthogonal projection of vec off span(basis) in the weighted inner product."""
    out = vec.astype(float).copy()
    # Gram-Schmidt the basis first so the projection is exact and idempotent
    ortho = []
    for b in basis:
        bb = b.astype(float).copy()
        for o in ortho:
            bb -= _wdot(w, o, bb) * o
        nrm = np.sqrt(_wdot(w, bb, bb))
        if nrm > 1e-300:
            ortho.append(bb / nrm)
    for o in ortho:
        out -= _wdot(w, o, out) * o
    return out


def project_Gperp(h: np.ndarray, op: LinearizedOperator) -> np.ndarray:
    """Project onto {int (Delta Q) h1 = 0, int Q h2 = 0} (radial sector)."""
    gs = op.gs
    w = op.grid.w
    lapQ = op.grid.laplacian(gs.Q)
    h1 = _project_off(w, np.real(h), [lapQ])
    h2 = _project_off(w, np.imag(h), [gs.Q])
    return h1 + 1j * h2


def project_GperpPrime(h: np.ndarray, op: LinearizedOperator, pair: EigenPair) -> np.ndarray:
    """Project onto {int Q h2 = 0, int Y1 h2 = 0, int Y2 h1 = 0} (radial sector)."""
    gs = op.gs
    w = op.grid.w
    h1 = _project_off(w, np.real(h), [pair.Y2])
    h2 = _project_off(w, np.imag(h), [gs.Q, pair.Y1])
    return h1 + 1j * h2


def resolvent_solve(
    op: LinearizedOperator,
    lam: float,
    rhs: np.ndarray,
    *,
    pair: EigenPair | None = None,
    spectrum_tol: float = 1e-8,
) -> np.ndarray:
    """Solve (L - lam) v = rhs on the 2M real block system.

    rhs and the returned v are complex fields identified with real pairs.
    """
    known = [0.0]
    if pair is not None:
        known += [pair.e0, -pair.e0]
    for mu in known:
        if abs(lam - mu) <= spectrum_tol * max(1.0, abs(mu)):
            raise SingularResolvent(f"lambda={lam} is in the discrete spectrum")
    M = op.grid.M
    block = (op.block() - lam * sp.identity(2 * M, format="csc")).tocsc()
    b = np.concatenate([np.real(rhs), np.imag(rhs)])
    try:
        sol = spla.spsolve(block, b)
    except RuntimeError as exc:  # singular factorization
        raise SingularResolvent(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularResolvent(f"solve at lambda={lam} produced non-finite values")
    res = np.linalg.norm(block @ sol - b)
    scale = np.linalg.norm(b) + np.linalg.norm(sol)
    if scale > 0 and res > 1e-9 * scale:
        raise SingularResolvent(
            f"resolvent residual {res / scale:.3e} at lambda={lam}: near-singular system"
        )
    return sol[:M] + 1j * sol[M:]


def e0_shooting_oracle(
    gs: GroundState,
    e0_guess: float,
    ratio_guess: float,
) -> float:
    """Independent check of e0 by two-sided shooting on the coupled eigen-ODE.

    Integrates the (Y1, Y2) system outward from the origin (unknown ratio
    a = Y2(0)/Y1(0)) and inward from R* with the decaying complex asymptotic
    c r^{-(N-1)/2} e^{-mu r}, mu = sqrt(omega + i e0); matches the two
    two-dimensional solution families at an interior radius.
    """
    from scipy.integrate import solve_ivp
    from scipy.interpolate import CubicSpline
    from scipy.optimize import least_squares

    grid = gs.grid
    N, p, omega = gs.params.N, gs.params.p, gs.params.omega
    rq = np.concatenate([[-grid.r[1], -grid.r[0]], grid.r])
    Qsp = CubicSpline(rq, np.concatenate([[gs.Q[1], gs.Q[0]], gs.Q]))
    Rstar = 15 / np.sqrt(omega)
    Rmatch = 3.0 / np.sqrt(omega)
    r0 = 1e-6

    def rhs_factory(e0):
        rmax = grid.r[-1]

        def rhs(rr, y):
            Qv = Qsp(rr) if rr < rmax else 0.0
            y1, dy1, y2, dy2 = y
            return [
                dy1,
                (omega - p * Qv ** (p - 1)) * y1 - e0 * y2 - (N - 1) / rr * dy1,
                dy2,
                (omega - Qv ** (p - 1)) * y2 + e0 * y1 - (N - 1) / rr * dy2,
            ]

        return rhs

    def residual(x):
        e0, a = x
        rhs = rhs_factory(e0)
        Q0 = float(Qsp(0.0))
        lap1 = (omega - p * Q0 ** (p - 1)) - e0 * a
        lap2 = (omega - Q0 ** (p - 1)) * a + e0
        y0 = [
            1.0 + lap1 * r0**2 / (2 * N), lap1 * r0 / N,
            a + lap2 * r0**2 / (2 * N), lap2 * r0 / N,
        ]
        out = solve_ivp(rhs, [r0, Rmatch], y0, method="DOP853",
                        rtol=1e-13, atol=1e-15).y[:, -1]
        mu = np.sqrt(omega + 1j * e0)
        cols = []
        for c in (1.0, 1.0j):
            dW = (-(N - 1) / (2 * Rstar) - mu) * c
            yin = [c.real, dW.real, c.imag, dW.imag]
            cols.append(
                solve_ivp(rhs, [Rstar, Rmatch], yin, method="DOP853",
                          rtol=1e-13, atol=1e-17).y[:, -1]
            )
        B = np.column_stack(cols)
        B = B / np.linalg.norm(B)
        Qf, _ = np.linalg.qr(B, mode="complete")
        perp = Qf[:, 2:]
        for k in range(perp.shape[1]):
            if perp[np.argmax(np.abs(perp[:, k])), k] < 0:
                perp[:, k] *= -1
        return perp.T @ out / np.linalg.norm(out)

    sol = least_squares(
        residual, [e0_guess, ratio_guess],
        xtol=1e-15, ftol=1e-15, gtol=1e-15, diff_step=1e-7,
    )
    if not sol.success or np.linalg.norm(sol.fun) > 1e-6:
        raise NoUnstableEigenvalue(
            f"shooting oracle failed: residual {np.linalg.norm(sol.fun):.3e}"
        )
    return float(sol.x[0])
