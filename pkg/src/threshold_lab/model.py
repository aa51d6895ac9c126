"""Problem parameters, conserved quantities, and scale-invariant thresholds.

The equation is the focusing nonlinear Schrodinger equation

    i u_t + Delta u + |u|^{p-1} u = 0   on R^N,

in the intercritical window 0 < s_c < 1, s_c = N/2 - 2/(p-1).  The standing
wave frequency used throughout is omega = 1 - s_c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CriticalityError, DegenerateInput, GridError
from .grid import RadialField

__all__ = [
    "ModelParams",
    "ConservedTriple",
    "ThresholdReport",
    "derive_params",
    "conserved",
    "threshold_report",
    "rescale_to_Q_mass",
    "galilean_reduced",
]


@dataclass(frozen=True)
class ModelParams:
    N: int
    p: float
    s_c: float
    omega: float


@dataclass(frozen=True)
class ConservedTriple:
    mass: float
    energy: float
    momentum: tuple  # identically zero for radial fields


@dataclass(frozen=True)
class ThresholdReport:
    me_product: float
    grad_product: float
    me_Q: float
    grad_Q: float
    me_side: str  # below | at | above
    grad_side: str
    rel_tol: float


def derive_params(N: int, p: float) -> ModelParams:
    if N < 1 or p <= 1:
        raise CriticalityError(N, p, float("nan"))
    s_c = N / 2 - 2 / (p - 1)
    if not 0 < s_c < 1:
        raise CriticalityError(N, p, s_c)
    return ModelParams(N=int(N), p=float(p), s_c=s_c, omega=1 - s_c)


def conserved(u: RadialField, params: ModelParams) -> ConservedTriple:
    vals = u.values
    if not np.all(np.isfinite(vals)):
        raise GridError("field contains non-finite samples")
    mass = u.mass()
    energy = 0.5 * u.grad_sq() - u.norm_lp(params.p + 1) ** (params.p + 1) / (params.p + 1)
    return ConservedTriple(mass=mass, energy=energy, momentum=(0.0,) * params.N)


def _side(value: float, reference: float, rel_tol: float) -> str:
    scale = max(abs(reference), 1e-300)
    if abs(value - reference) <= rel_tol * scale:
        return "at"
    return "below" if value < reference else "above"


def threshold_report(u: RadialField, gs, rel_tol: float = 1e-6) -> ThresholdReport:
    """Scale-invariant comparisons of u against the ground state."""
    params = gs.params
    expo = (1 - params.s_c) / params.s_c
    c = conserved(u, params)
    me = c.mass**expo * c.energy
    grad = u.norm_h1dot() * u.norm_l2() ** expo
    me_Q = gs.mass**expo * gs.energy
    grad_Q = np.sqrt(gs.grad_sq) * np.sqrt(gs.mass) ** expo
    return ThresholdReport(
        me_product=me,
        grad_product=grad,
        me_Q=me_Q,
        grad_Q=grad_Q,
        me_side=_side(me, me_Q, rel_tol),
        grad_side=_side(grad, grad_Q, rel_tol),
        rel_tol=rel_tol,
    )


def rescale_to_Q_mass(u0: RadialField, gs) -> tuple[RadialField, float]:
    """Rescale u0 by the mass-preserving scaling so M(result) = M(Q).

    Returns (lambda^{2/(p-1)} u0(lambda x) resampled on the same grid, lambda).
    The scaling satisfies lambda^{-2 s_c} = M(Q)/M(u0).
    """
    from scipy.interpolate import CubicSpline

    params = gs.params
    m0 = u0.mass()
    if m0 <= 0:
        raise DegenerateInput("cannot rescale the zero field")
    lam = (m0 / gs.mass) ** (1 / (2 * params.s_c))
    g = u0.grid
    # sample u0 at lambda*r with even extension at the origin, zero past Rmax
    rq = np.concatenate([[-g.r[1], -g.r[0]], g.r])
    vq = np.concatenate([[u0.values[1], u0.values[0]], u0.values])
    spline_re = CubicSpline(rq, vq.real)
    spline_im = CubicSpline(rq, vq.imag)
    rs = lam * g.r
    inside = rs <= g.r[-1]
    out = np.zeros(g.M, dtype=complex)
    out[inside] = spline_re(rs[inside]) + 1j * spline_im(rs[inside])
    out *= lam ** (2 / (params.p - 1))
    return RadialField(g, out), float(lam)


def galilean_reduced(M: float, E: float, Pnorm: float) -> tuple[float, float]:
    """Scalar Galilean reduction: (M, E - P^2 / (2M))."""
    if M <= 0:
        raise DegenerateInput("Galilean reduction needs positive mass")
    return M, E - Pnorm**2 / (2 * M)
