"""Recursive profile expansions and the special-solution seeds.

The one-parameter family of approximate solutions near the standing wave is

    U_k^A(t) = e^{i omega t} (Q + V_k^A(t)),
    V_k^A(t) = sum_{j=1}^k q^j Z_j,    q = e^{-e0 t},

with Z_1 = A (Y1 + i Y2) and each higher profile obtained by a resolvent solve
at j*e0 against the polynomial-in-q coefficients of the nonlinear remainder.

Pair/complex bookkeeping: the complex perturbation equation
i h_t + Delta h - omega h + S(h) = 0 is equivalent to the real-pair system
d/dt (h1, h2) + L (h1, h2) = (R2, -R1), i.e. a complex right-hand side F maps
to the pair (Im F, -Re F) = the pair of -iF.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExpansionIllConditioned, SeedTooLarge
from .grid import RadialField
from .groundstate import GroundState
from .linop import EigenPair, LinearizedOperator, resolvent_solve

__all__ = [
    "ProfileExpansion",
    "ResidualTrace",
    "nonlinearity_S",
    "nonlinearity_R",
    "expand_R_in_q",
    "build_profiles",
    "evaluate_Vk",
    "approximate_solution",
    "special_seed",
    "residual_trace",
]


@dataclass(frozen=True)
class ProfileExpansion:
    A: float
    k: int
    Z: tuple = field(repr=False)  # k complex arrays, Z[j-1] multiplies q^j
    e0: float
    gs: GroundState


@dataclass(frozen=True)
class ResidualTrace:
    times: np.ndarray
    eps_norm: np.ndarray
    fitted_rate: float


def nonlinearity_S(h: np.ndarray, gs: GroundState) -> np.ndarray:
    """S(h) = |Q+h|^{p-1}(Q+h) - Q^p."""
    p, Q = gs.params.p, gs.Q
    W = Q + h
    return np.abs(W) ** (p - 1) * W - Q**p


def nonlinearity_R(h: np.ndarray, gs: GroundState) -> np.ndarray:
    """R(h) = Q^p + pQ^{p-1}h1 + iQ^{p-1}h2 - |Q+h|^{p-1}(Q+h); O(|h|^2)."""
    p, Q = gs.params.p, gs.Q
    h1, h2 = h.real, h.imag
    W = Q + h
    return Q**p + p * Q ** (p - 1) * h1 + 1j * Q ** (p - 1) * h2 - np.abs(W) ** (p - 1) * W


def _R_of_q(gs: GroundState, Zs, q: float) -> np.ndarray:
    V = sum(q ** (m + 1) * Z for m, Z in enumerate(Zs))
    return nonlinearity_R(V, gs)


def expand_R_in_q(
    gs: GroundState,
    Zs,
    order: int,
    *,
    qmax: float = 0.05,
    validate: bool = True,
) -> np.ndarray:
    """Coefficient of q^order of q -> R(sum_j q^j Z_j), by polynomial fit.

    Samples at Chebyshev nodes in [0, qmax]; Q > 0 keeps |Q + V|^{p-1}(Q + V)
    smooth there for non-integer p.  A held-out node validates the fit.
    """
    deg = order + 4
    nodes = qmax * (np.cos(np.pi * (2 * np.arange(deg + 1) + 1) / (2 * (deg + 1))) + 1) / 2
    vals = np.stack([_R_of_q(gs, Zs, q) for q in nodes])
    vand = np.vander(nodes, deg + 1, increasing=True)
    coef = np.linalg.solve(vand, vals)
    if validate:
        q_test = 0.37 * qmax  # not a Chebyshev node
        recon = sum(q_test**j * coef[j] for j in range(deg + 1))
        err = np.max(np.abs(recon - _R_of_q(gs, Zs, q_test)))
        scale = max(np.max(np.abs(vals)), 1e-300)
        if err > 1e-8 * scale:
            raise ExpansionIllConditioned(
                f"held-out interpolation error {err / scale:.3e} at order {order}"
            )
    return coef[order]


def build_profiles(
    A: float,
    k: int,
    pair: EigenPair,
    op: LinearizedOperator,
    *,
    qmax: float = 0.05,
) -> ProfileExpansion:
    if k < 1:
        raise ValueError("profile order k must be >= 1")
    gs = op.gs
    e0 = pair.e0
    if A == 0:
        Zs = [np.zeros(gs.grid.M, dtype=complex) for _ in range(k)]
        return ProfileExpansion(A=0.0, k=k, Z=tuple(Zs), e0=e0, gs=gs)
    Zs = [A * (pair.Y1 + 1j * pair.Y2)]
    for j in range(2, k + 1):
        F = expand_R_in_q(gs, Zs, j, qmax=qmax)
        # complex right-hand side -> pair of -iF (see module docstring)
        Zs.append(resolvent_solve(op, j * e0, -1j * F, pair=pair))
    return ProfileExpansion(A=float(A), k=k, Z=tuple(Zs), e0=e0, gs=gs)


def evaluate_Vk(exp: ProfileExpansion, t: float) -> RadialField:
    q = np.exp(-exp.e0 * t)
    V = sum(q ** (m + 1) * Z for m, Z in enumerate(exp.Z))
    return RadialField(exp.gs.grid, V)


def approximate_solution(exp: ProfileExpansion, t: float) -> RadialField:
    """U_k^A(t) = e^{i omega t} (Q + V_k^A(t))."""
    V = evaluate_Vk(exp, t).values
    phase = np.exp(1j * exp.gs.params.omega * t)
    return RadialField(exp.gs.grid, phase * (exp.gs.Q + V))


def seed_time(exp: ProfileExpansion, seed_tol: float = 1e-3) -> float:
    """Smallest t with ||V_k(t)||_{H1} <= seed_tol."""
    lead = np.sqrt(np.sum(np.abs(exp.Z[0]) ** 2))
    if lead == 0:
        return 0.0
    t = 0.0
    for _ in range(200):
        nrm = evaluate_Vk(exp, t).norm_h1()
        if nrm <= seed_tol:
            # bisect back toward the crossing for the smallest such t
            lo, hi = max(0.0, t - 1.0 / exp.e0), t
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if evaluate_Vk(exp, mid).norm_h1() <= seed_tol:
                    hi = mid
                else:
                    lo = mid
            return hi
        t += 1.0 / exp.e0
    raise SeedTooLarge(f"||V_k(t)|| never reached {seed_tol}")


def special_seed(
    sign: int,
    exp_plus: ProfileExpansion,
    exp_minus: ProfileExpansion | None = None,
    *,
    t0: float | None = None,
    seed_tol: float = 1e-3,
) -> tuple[RadialField, float]:
    """Initial datum approximating the threshold special solutions at t = 0.

    Returns (Q + V_k^{sign}(t0), t0): the time-t0 slice of the approximate
    solution with the standing-wave phase removed.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    exp = exp_plus if sign > 0 else (exp_minus if exp_minus is not None else exp_plus)
    if sign < 0 and exp_minus is None:
        raise ValueError("need the A=-1 expansion for the minus seed")
    if t0 is None:
        t0 = seed_time(exp, seed_tol)
    V = evaluate_Vk(exp, t0)
    if V.norm_h1() > seed_tol * 1.5:
        raise SeedTooLarge(
            f"||V_k(t0)||_H1 = {V.norm_h1():.3e} exceeds seed tolerance {seed_tol}"
        )
    gs = exp.gs
    return RadialField(gs.grid, gs.Q + V.values), float(t0)


def residual_trace(exp: ProfileExpansion, times: np.ndarray) -> ResidualTrace:
    """H1 norm of eps_k(t) = i dV/dt + Delta V - omega V + S(V) over times."""
    gs = exp.gs
    grid = gs.grid
    omega = gs.params.omega
    out = []
    for t in times:
        q = np.exp(-exp.e0 * t)
        V = sum(q ** (m + 1) * Z for m, Z in enumerate(exp.Z))
        dtV = sum(-(m + 1) * exp.e0 * q ** (m + 1) * Z for m, Z in enumerate(exp.Z))
        eps = 1j * dtV + grid.lap_matrix @ V - omega * V + nonlinearity_S(V, gs)
        h1 = np.sqrt(
            np.sum(grid.w * np.abs(eps) ** 2)
            + np.sum(grid.w * np.abs(grid.deriv(eps)) ** 2)
        )
        out.append(h1)
    eps_norm = np.array(out)
    rate = float(-np.polyfit(times, np.log(eps_norm), 1)[0])
    return ResidualTrace(times=np.asarray(times, float), eps_norm=eps_norm, fitted_rate=rate)
