"""Modulation machinery near the standing-wave orbit.

Given u close (in the gradient-gap sense) to the orbit {e^{i theta} Q}, the
decomposition

    e^{-i theta - i omega t} u = (1 + alpha) Q + h

fixes theta by the orthogonality Im int e^{-i theta - i omega t} u Q = 0 and
alpha by matching the gradient overlap, which enforces

    int grad Q . grad h1 = 0    and    int Q h2 = 0.

delta(u) = | ||grad Q||_2^2 - ||grad u||_2^2 | is the window parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, OutsideWindow, PhaseAmbiguity
from .grid import RadialField
from .groundstate import GroundState

__all__ = ["ModulationFrame", "delta", "decompose", "modulation_rates"]


@dataclass(frozen=True)
class ModulationFrame:
    theta: float
    alpha: float
    h: np.ndarray = field(repr=False)
    delta: float
    in_window: bool
    t: float


def delta(u: RadialField, gs: GroundState) -> float:
    return float(abs(gs.grad_sq - u.grad_sq()))


def default_window(gs: GroundState) -> float:
    return 0.05 * gs.grad_sq


def decompose(
    u: RadialField,
    t: float,
    gs: GroundState,
    *,
    delta0: float | None = None,
    require_window: bool = True,
) -> ModulationFrame:
    grid = gs.grid
    w = grid.w
    if delta0 is None:
        delta0 = default_window(gs)
    dlt = delta(u, gs)
    if require_window and dlt >= delta0:
        raise OutsideWindow(f"delta = {dlt:.3e} >= window {delta0:.3e}")

    overlap = np.sum(w * u.values * gs.Q)
    if abs(overlap) < 1e-12:
        raise PhaseAmbiguity("field nearly orthogonal to Q; phase undefined")
    omega = gs.params.omega
    theta = float(np.angle(overlap) - omega * t)

    v = np.exp(-1j * theta - 1j * omega * t) * u.values
    # use the same discrete derivative for both factors so the enforced
    # orthogonality int grad Q . grad h1 = 0 holds to roundoff
    dQ = grid.deriv(gs.Q)
    grad_overlap = np.sum(w * grid.deriv(v).real * dQ)
    alpha = float(grad_overlap / gs.grad_sq - 1.0)
    h = v - (1 + alpha) * gs.Q
    return ModulationFrame(
        theta=theta, alpha=alpha, h=h, delta=dlt, in_window=dlt < delta0, t=float(t)
    )


def modulation_rates(frames: list[ModulationFrame]) -> dict:
    """Finite-difference |alpha'|/delta and |theta'|/delta over a frame series."""
    usable = [f for f in frames if f.in_window]
    if len(usable) < 3:
        raise InsufficientSamples(f"need >= 3 in-window frames, got {len(usable)}")
    ts = np.array([f.t for f in usable])
    alphas = np.array([f.alpha for f in usable])
    thetas = np.unwrap(np.array([f.theta for f in usable]))
    deltas = np.array([f.delta for f in usable])

    dalpha = np.gradient(alphas, ts)
    dtheta = np.gradient(thetas, ts)
    safe = np.maximum(deltas, 1e-300)
    ra = np.abs(dalpha) / safe
    rt = np.abs(dtheta) / safe
    return {
        "sup_alpha_rate": float(ra.max()),
        "sup_theta_rate": float(rt.max()),
        "max_over_median_alpha": float(ra.max() / max(np.median(ra), 1e-300)),
        "max_over_median_theta": float(rt.max() / max(np.median(rt), 1e-300)),
        "n_frames": len(usable),
    }
