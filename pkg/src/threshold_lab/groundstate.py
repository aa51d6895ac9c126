"""Ground-state solver and certification.

Solves Q'' + ((N-1)/r) Q' - omega Q + Q^p = 0, Q'(0) = 0, Q > 0 decaying, by
bisection shooting on Q(0) (undershoot = Q crosses zero, overshoot = Q' turns
positive), followed by a Newton polish of the discrete nonlinear system on the
grid.  Certification is by the Pohozaev identities, not by re-deriving
uniqueness.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import NoConvergence, DegenerateInput, ResidualTooLarge
from .grid import RadialField, RadialGrid, make_grid, default_rmax
from .model import ModelParams, derive_params

__all__ = [
    "GroundState",
    "solve_ground_state",
    "verify_pohozaev",
    "compute_cgn",
    "gn_deficit",
    "sech_profile_1d",
]

CACHE_FORMAT_VERSION = 2


@dataclass(frozen=True)
class GroundState:
    params: ModelParams
    grid: RadialGrid
    Q: np.ndarray = field(repr=False)  # real positive samples
    Qprime: np.ndarray = field(repr=False)  # dQ/dr from the shooting integrator
    Q0: float
    mass: float  # ||Q||_2^2
    grad_sq: float  # ||grad Q||_2^2
    lp1: float  # ||Q||_{p+1}^{p+1}
    energy: float
    residual: float  # ||Delta Q - omega Q + Q^p||_2 / ||Q||_{H1}

    @property
    def cgn(self) -> float:
        return compute_cgn(self)

    def as_field(self) -> RadialField:
        return RadialField(self.grid, self.Q.astype(complex))

    @property
    def grad_product(self) -> float:
        expo = (1 - self.params.s_c) / self.params.s_c
        return float(np.sqrt(self.grad_sq) * np.sqrt(self.mass) ** expo)

    @property
    def me_product(self) -> float:
        expo = (1 - self.params.s_c) / self.params.s_c
        return float(self.mass**expo * self.energy)


def sech_profile_1d(params: ModelParams, r: np.ndarray) -> np.ndarray:
    """Closed-form 1D solitary profile, used as an oracle for N=1."""
    p, omega = params.p, params.omega
    amp = (omega * (p + 1) / 2) ** (1 / (p - 1))
    return amp / np.cosh((p - 1) * np.sqrt(omega) * r / 2) ** (2 / (p - 1))


def _shoot_rhs(N: int, p: float, omega: float):
    def rhs(rr, y):
        q, dq = y
        f = omega * q - np.sign(q) * np.abs(q) ** p
        if rr < 1e-12:
            return [dq, f / N]
        return [dq, f - (N - 1) / rr * dq]

    return rhs


def _classify_shot(N, p, omega, a, Rshoot):
    rhs = _shoot_rhs(N, p, omega)
    ev_cross = lambda rr, y: y[0]
    ev_cross.terminal, ev_cross.direction = True, -1
    ev_grow = lambda rr, y: y[1]
    ev_grow.terminal, ev_grow.direction = True, 1
    sol = solve_ivp(
        rhs, [0, Rshoot], [a, 0.0], events=[ev_cross, ev_grow],
        rtol=1e-10, atol=1e-30, method="DOP853",
    )
    if sol.t_events[0].size:
        return "cross"
    if sol.t_events[1].size:
        return "grow"
    return "decay"


def _cache_dir() -> Path:
    env = os.environ.get("THRESHOLD_LAB_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "threshold_lab"


def _cache_key(params: ModelParams, grid: RadialGrid) -> str:
    return f"ground_N{params.N}_p{params.p:.17g}_M{grid.M}_R{grid.Rmax:.17g}"


def _try_load_cache(params: ModelParams, grid: RadialGrid):
    base = _cache_dir() / _cache_key(params, grid)
    npz, sidecar = base.with_suffix(".npz"), base.with_suffix(".json")
    if not (npz.exists() and sidecar.exists()):
        return None
    try:
        data = np.load(npz)
        meta = json.loads(sidecar.read_text())
    except (OSError, ValueError):
        return None
    if int(data.get("version", -1)) != CACHE_FORMAT_VERSION:
        return None
    return GroundState(
        params=params, grid=grid,
        Q=data["Q"], Qprime=data["Qprime"], Q0=meta["Q0"],
        mass=meta["mass"], grad_sq=meta["grad_sq"], lp1=meta["lp1"],
        energy=meta["energy"], residual=meta["residual"],
    )


def _store_cache(gs: GroundState):
    base = _cache_dir() / _cache_key(gs.params, gs.grid)
    base.parent.mkdir(parents=True, exist_ok=True)
    tmp = base.with_suffix(".npz.tmp")
    with open(tmp, "wb") as f:
        np.savez(f, version=CACHE_FORMAT_VERSION, Q=gs.Q, Qprime=gs.Qprime)
    tmp.replace(base.with_suffix(".npz"))
    meta = {
        "Q0": gs.Q0, "mass": gs.mass, "grad_sq": gs.grad_sq, "lp1": gs.lp1,
        "energy": gs.energy, "residual": gs.residual,
        "N": gs.params.N, "p": gs.params.p,
        "M": gs.grid.M, "Rmax": gs.grid.Rmax,
    }
    tmp_json = base.with_suffix(".json.tmp")
    tmp_json.write_text(json.dumps(meta, sort_keys=True, indent=1))
    tmp_json.replace(base.with_suffix(".json"))


def solve_ground_state(
    params: ModelParams,
    grid: RadialGrid | None = None,
    *,
    use_cache: bool = True,
) -> GroundState:
    if grid is None:
        grid = make_grid(params.N, 4096, default_rmax(params.omega))
    if use_cache:
        cached = _try_load_cache(params, grid)
        if cached is not None:
            return cached

    N, p, omega = params.N, params.p, params.omega
    # Shoot on a window of ~25 tail e-foldings; beyond that, roundoff in the
    # integrator makes under/overshoot classification unreliable.
    Rshoot = min(grid.Rmax, 25 / np.sqrt(omega))
    a = omega ** (1 / (p - 1)) * 1.0001
    b = 10 * omega ** (1 / (p - 1)) * (p + 1) ** (1 / (p - 1))
    if _classify_shot(N, p, omega, a, Rshoot) != "grow" or \
            _classify_shot(N, p, omega, b, Rshoot) != "cross":
        raise NoConvergence("bisection bracket for Q(0) not found")
    for _ in range(60):
        mid = 0.5 * (a + b)
        if _classify_shot(N, p, omega, mid, Rshoot) == "grow":
            a = mid
        else:
            b = mid
    a0 = 0.5 * (a + b)

    r = grid.r
    r_in = r[r <= Rshoot]
    sol = solve_ivp(
        _shoot_rhs(N, p, omega), [0, Rshoot], [a0, 0.0], t_eval=r_in,
        rtol=1e-12, atol=1e-30, method="DOP853",
    )
    Q = np.zeros(grid.M)
    Qp = np.zeros(grid.M)
    Q[: len(r_in)] = np.maximum(sol.y[0], 0.0)
    Qp[: len(r_in)] = np.minimum(sol.y[1], 0.0)
    # analytic far-field continuation c r^{-(N-1)/2} e^{-sqrt(omega) r}
    j0 = len(r_in) - 1
    c = Q[j0] * r[j0] ** ((N - 1) / 2) * np.exp(np.sqrt(omega) * r[j0])
    tail = r[j0 + 1:]
    Q[j0 + 1:] = c * tail ** (-(N - 1) / 2) * np.exp(-np.sqrt(omega) * tail)
    Qp[j0 + 1:] = Q[j0 + 1:] * (-(N - 1) / (2 * tail) - np.sqrt(omega))

    # Newton polish of the discrete system A Q - omega Q + |Q|^{p-1} Q = 0
    A = grid.lap_matrix
    I = sp.identity(grid.M, format="csr")
    for _ in range(40):
        F = A @ Q - omega * Q + np.abs(Q) ** (p - 1) * Q
        J = (A - omega * I + sp.diags(p * np.abs(Q) ** (p - 1))).tocsc()
        dQ = spla.spsolve(J, F)
        Q = Q - dQ
        if np.abs(dQ).max() < 1e-13 * np.abs(Q).max():
            break
    else:
        raise NoConvergence("Newton polish did not converge")
    # the shot's derivative channel is unreliable near the window edge;
    # recompute the derivative from the polished profile
    Qp = grid.deriv(Q)

    w = grid.w
    mass = float(np.sum(w * Q * Q))
    grad_sq = float(np.sum(w * (grid.deriv(Q)) ** 2))
    lp1 = float(np.sum(w * np.abs(Q) ** (p + 1)))
    energy = 0.5 * grad_sq - lp1 / (p + 1)
    res_vec = A @ Q - omega * Q + np.abs(Q) ** (p - 1) * Q
    residual = float(np.sqrt(np.sum(w * res_vec**2)) / np.sqrt(mass + grad_sq))
    if residual > 1e-8:
        raise ResidualTooLarge(f"ground-state residual {residual:.3e} > 1e-8")

    gs = GroundState(
        params=params, grid=grid, Q=Q, Qprime=Qp, Q0=float(a0),
        mass=mass, grad_sq=grad_sq, lp1=lp1, energy=energy, residual=residual,
    )
    if use_cache:
        _store_cache(gs)
    return gs


def verify_pohozaev(gs: GroundState) -> dict[str, float]:
    """Relative residuals of the three Pohozaev identities."""
    N, p = gs.params.N, gs.params.p
    res1 = abs(gs.mass - (2 / N) * gs.grad_sq) / gs.mass
    res2 = abs(gs.lp1 - (2 * (p + 1) / (N * (p - 1))) * gs.grad_sq) / gs.lp1
    target_E = (N * (p - 1) - 4) / (2 * N * (p - 1)) * gs.grad_sq
    res3 = abs(gs.energy - target_E) / max(abs(target_E), gs.grad_sq * 1e-3)
    return {"mass_vs_grad": res1, "lp1_vs_grad": res2, "energy_vs_grad": res3}


def compute_cgn(gs: GroundState) -> float:
    """Sharp Gagliardo-Nirenberg constant evaluated at the minimizer."""
    N, p = gs.params.N, gs.params.p
    a = N * (p - 1) / 2
    b = 2 - (N - 2) * (p - 1) / 2
    return float(gs.lp1 / (np.sqrt(gs.grad_sq) ** a * np.sqrt(gs.mass) ** b))


def gn_deficit(u: RadialField, gs: GroundState) -> float:
    """Deficit functional of the sharp Gagliardo-Nirenberg inequality.

    Non-negative for every nonzero H^1 field, zero exactly at the minimizer
    (up to symmetries).
    """
    N, p = gs.params.N, gs.params.p
    m = u.mass()
    gsq = u.grad_sq()
    if m <= 0:
        raise DegenerateInput("deficit undefined for the zero field")
    a = N * (p - 1) / 2
    b = 2 - (N - 2) * (p - 1) / 2
    num = np.sqrt(gsq) ** a * np.sqrt(m) ** b
    den = np.sqrt(gs.grad_sq) ** a * np.sqrt(gs.mass) ** b
    lp1_u = u.norm_lp(p + 1) ** (p + 1)
    return float(num / den - lp1_u / gs.lp1)
