"""Localized virial machinery, the smooth cutoff, the radial tail
functional, and the trajectory classifier.

The cutoff is phi(s) = s^2 for s <= 1 and constant (phi' = 0) for s >= 2,
bridged on [1, 2] by integrating phi''(s) = 2 - 2520 (s-1)^4 (2-s)^4 twice.
The bump constant is exactly the one making phi'(2) = 0, and the high-order
tangency makes phi C^5 at both joins so the bilaplacian term in A_R is
classical.  Note phi'' dips negative on the bridge (min = 2 - 2520/256);
a cutoff with phi' going from 2 to 0 cannot have phi'' >= 0, so only the
upper bound phi'' <= 2 (the one the virial sign argument uses) is enforced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CutoffOutOfDomain
from .grid import RadialField, RadialGrid
from .groundstate import GroundState

__all__ = [
    "Cutoff",
    "make_cutoff",
    "virial_quantities",
    "tail_rho",
    "classify",
    "Verdict",
]

def _build_bridge():
    """Bridge polynomials for phi'' on 1 <= s <= 2 (o = s - 1 in [0, 1]).

    phi'' = 2 - 2*I - 1890*u - 3150*u*(1-2o) with u = o^4 (1-o)^4 and
    I = 630 * int u (the quintic-order smoothstep).  The three pieces give
    C^4 joins (u has fourth-order zeros at both ends), phi''(1)=2,
    phi''(2)=0, phi'(2)=0 (integral condition, constant 1890) and
    phi(2)=2 (first-moment condition, constant 3150).  phi'' <= 2 holds
    throughout; its minimum is about -7.08 mid-bridge.
    """
    from numpy.polynomial import Polynomial as P

    o = P([0.0, 1.0])
    u = o**4 * (1 - o) ** 4
    g = 2 - 2 * (630 * u.integ()) - 1890 * u - 3150 * u * (1 - 2 * o)
    d1 = 2 + g.integ()
    phi = 1 + d1.integ()
    return phi, d1, g, g.deriv(), g.deriv(2)


_BRIDGE = _build_bridge()


def _phi_pieces(s: np.ndarray):
    """phi and its first four derivatives at scaled radii s = r/R."""
    s = np.asarray(s, dtype=float)
    phi = np.empty_like(s)
    d1 = np.empty_like(s)
    d2 = np.empty_like(s)
    d3 = np.empty_like(s)
    d4 = np.empty_like(s)

    core = s <= 1.0
    plat = s >= 2.0
    mid = ~(core | plat)

    phi[core] = s[core] ** 2
    d1[core] = 2 * s[core]
    d2[core] = 2.0
    d3[core] = 0.0
    d4[core] = 0.0

    phi[plat] = 2.0
    d1[plat] = 0.0
    d2[plat] = 0.0
    d3[plat] = 0.0
    d4[plat] = 0.0

    o = s[mid] - 1.0
    p_phi, p_d1, p_d2, p_d3, p_d4 = _BRIDGE
    phi[mid] = p_phi(o)
    d1[mid] = p_d1(o)
    d2[mid] = p_d2(o)
    d3[mid] = p_d3(o)
    d4[mid] = p_d4(o)
    return phi, d1, d2, d3, d4


@dataclass(frozen=True)
class Cutoff:
    R: float
    grid: RadialGrid
    phi: np.ndarray = field(repr=False)
    dphi: np.ndarray = field(repr=False)
    d2phi: np.ndarray = field(repr=False)
    lap_phi: np.ndarray = field(repr=False)  # N-dim Laplacian of phi(x/R) in s
    bilap_phi: np.ndarray = field(repr=False)


def make_cutoff(R: float, grid: RadialGrid) -> Cutoff:
    if not 0 < 2 * R < grid.Rmax:
        raise CutoffOutOfDomain(f"need 0 < 2R < Rmax, got R={R}, Rmax={grid.Rmax}")
    s = grid.r / R
    phi, d1, d2, d3, d4 = _phi_pieces(s)
    N = grid.N
    lap = d2 + (N - 1) * d1 / s
    dlap = d3 + (N - 1) * (d2 / s - d1 / s**2)
    d2lap = d4 + (N - 1) * (d3 / s - 2 * d2 / s**2 + 2 * d1 / s**3)
    bilap = d2lap + (N - 1) / s * dlap
    return Cutoff(R=float(R), grid=grid, phi=phi, dphi=d1, d2phi=d2,
                  lap_phi=lap, bilap_phi=bilap)


def virial_quantities(
    u: RadialField, cutoff: Cutoff, params, gs: GroundState
) -> tuple[float, float, float, float]:
    """(y_R, y'_R, y''_R, A_R) for a radial field.

    y_R    = int R^2 phi(x/R) |u|^2
    y'_R   = 2 R Im int conj(u) phi'(r/R) d_r u
    A_R    = 4 int (phi'' - 2) |d_r u|^2  -  (1/R^2) int Delta^2 phi |u|^2
             - (2(p-1)/(p+1)) int (Delta phi - 2N) |u|^{p+1}
    y''_R  = (2N(p-1) - 8) (||grad Q||^2 - ||grad u||^2) + A_R
    """
    grid = u.grid
    if grid != cutoff.grid:
        raise CutoffOutOfDomain("cutoff built on a different grid")
    N, p = params.N, params.p
    w = grid.w
    R = cutoff.R
    vals = u.values
    du = grid.deriv(vals)
    amp2 = vals.real**2 + vals.imag**2

    yR = R**2 * float(np.sum(w * cutoff.phi * amp2))
    yR_prime = 2 * R * float(np.sum(w * cutoff.dphi * np.imag(np.conj(vals) * du)))
    AR = (
        4 * float(np.sum(w * (cutoff.d2phi - 2.0) * (du.real**2 + du.imag**2)))
        - float(np.sum(w * cutoff.bilap_phi * amp2)) / R**2
        - (2 * (p - 1) / (p + 1))
        * float(np.sum(w * (cutoff.lap_phi - 2 * N) * amp2 ** ((p + 1) / 2)))
    )
    grad_sq = float(np.sum(w * (du.real**2 + du.imag**2)))
    yR_second = (2 * N * (p - 1) - 8) * (gs.grad_sq - grad_sq) + AR
    return yR, yR_prime, yR_second, AR


def tail_rho(u: RadialField, R: float, params) -> float:
    """sup over R' in [R, Rmax/2] of (R')^{-2 s_c} int_{R' <= r <= 2R'} |u|^2."""
    grid = u.grid
    if not 0 < R < grid.Rmax / 2:
        raise CutoffOutOfDomain(f"need 0 < R < Rmax/2, got R={R}")
    s_c = params.s_c
    amp2 = np.abs(u.values) ** 2
    csum = np.concatenate([[0.0], np.cumsum(grid.w * amp2)])

    def shell(a, b):
        ia = np.searchsorted(grid.r, a)
        ib = np.searchsorted(grid.r, b, side="right")
        return csum[ib] - csum[ia]

    # candidate radii: every grid point in [R, Rmax/2] (a superset of the
    # dyadic ladder; the sup over more points can only be larger)
    cands = grid.r[(grid.r >= R) & (grid.r <= grid.Rmax / 2)]
    if cands.size == 0:
        cands = np.array([R])
    best = 0.0
    for Rp in cands:
        val = Rp ** (-2 * s_c) * shell(Rp, 2 * Rp)
        if val > best:
            best = val
    return float(best)


@dataclass(frozen=True)
class Verdict:
    verdict: str  # blowup | converges_to_Q | disperses | undetermined
    evidence: dict


def classify(record, gs: GroundState, pair, *, rate_fraction: float = 0.5) -> Verdict:
    """Decision tree over a completed trajectory record.

    blow-up stop -> blowup; sustained dispersal proxy -> disperses; modulation
    convergence fit at >= rate_fraction * e0 -> converges_to_Q; otherwise
    undetermined.  Pure function of the record.
    """
    from .evolve import convergence_to_Q
    from .errors import NotInOrbitNeighborhood

    evidence: dict = {
        "stop_reason": record.stop_reason,
        "final_gradnorm": float(record.gradnorm_trace[-1]),
        "final_delta": float(record.delta_trace[-1]),
        "proxy_label": record.proxy_label,
    }
    if record.stop_reason == "blowup":
        return Verdict("blowup", evidence)
    if record.stop_reason == "dispersal_proxy":
        return Verdict("disperses", evidence)
    if record.stop_reason == "numerical_failure":
        return Verdict("undetermined", evidence)
    try:
        fit = convergence_to_Q(record, gs, pair)
    except NotInOrbitNeighborhood as exc:
        evidence["convergence_fit"] = f"failed: {exc}"
        return Verdict("undetermined", evidence)
    evidence["convergence_fit"] = fit
    if fit.get("degenerate"):
        # already sitting on the orbit at the discretization floor
        return Verdict("converges_to_Q", evidence)
    if fit["rate"] >= rate_fraction * pair.e0:
        return Verdict("converges_to_Q", evidence)
    return Verdict("undetermined", evidence)
