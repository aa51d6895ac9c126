import numpy as np
import pytest

from threshold_lab.errors import SeedTooLarge
from threshold_lab.grid import RadialField
from threshold_lab.model import conserved
from threshold_lab.profiles import (
    approximate_solution,
    build_profiles,
    evaluate_Vk,
    expand_R_in_q,
    nonlinearity_R,
    nonlinearity_S,
    residual_trace,
    seed_time,
    special_seed,
)


def test_zero_amplitude_is_standing_wave(pair33, op33, gs33):
    exp = build_profiles(0.0, 3, pair33, op33)
    assert all(np.all(Z == 0) for Z in exp.Z)
    U = approximate_solution(exp, 1.234)
    target = np.exp(1j * gs33.params.omega * 1.234) * gs33.Q
    assert np.max(np.abs(U.values - target)) < 1e-14


def test_nonlinearities_small_h_behavior(gs33):
    """S(h) = linearization + R-remainder with R = O(|h|^2)."""
    rng = np.random.default_rng(6)
    grid = gs33.grid
    h = 1e-5 * (rng.standard_normal(grid.M) + 1j * rng.standard_normal(grid.M)) * np.exp(-grid.r)
    p, Q = gs33.params.p, gs33.Q
    lin = p * Q ** (p - 1) * h.real + 1j * Q ** (p - 1) * h.imag
    S = nonlinearity_S(h, gs33)
    R = nonlinearity_R(h, gs33)
    assert np.max(np.abs(S - lin + R)) < 1e-14 * max(np.max(np.abs(S)), 1)
    assert np.max(np.abs(R)) < 10 * np.max(np.abs(h)) ** 2 * np.max(Q)


def test_expand_R_linear_coefficient_vanishes(gs33, pair33):
    """R is quadratic at the origin, so the q^1 Chebyshev coefficient is 0."""
    Zs = [pair33.Y1 + 1j * pair33.Y2]
    c1 = expand_R_in_q(gs33, Zs, 1)
    c2 = expand_R_in_q(gs33, Zs, 2)
    assert np.max(np.abs(c1)) < 1e-6 * np.max(np.abs(c2))


def test_profile_residual_hierarchy(gs33, op33, pair33):
    """epsilon_k decays at rate >= 0.9 (k+1) e0 over the resolvable window."""
    e0 = pair33.e0
    t_start = np.log(4.0) / e0
    times = np.linspace(t_start, t_start + 5 / e0, 12)
    for k in (1, 2):
        exp = build_profiles(1.0, k, pair33, op33)
        trace = residual_trace(exp, times)
        assert trace.fitted_rate >= 0.9 * (k + 1) * e0


def test_seed_time_and_seed(exp_p33, gs33):
    t0 = seed_time(exp_p33, 1e-3)
    assert evaluate_Vk(exp_p33, t0).norm_h1() <= 1e-3 * (1 + 1e-9)
    # smallest such t: slightly earlier the norm exceeds the tolerance
    assert evaluate_Vk(exp_p33, t0 - 0.05).norm_h1() > 1e-3
    seed, t0b = special_seed(+1, exp_p33)
    assert t0b == pytest.approx(t0)
    assert np.max(np.abs(seed.values - gs33.Q - evaluate_Vk(exp_p33, t0).values)) < 1e-15


def test_seed_validation(exp_p33, exp_m33):
    with pytest.raises(ValueError):
        special_seed(0, exp_p33, exp_m33)
    with pytest.raises(ValueError):
        special_seed(-1, exp_p33, None)
    with pytest.raises(SeedTooLarge):
        special_seed(+1, exp_p33, exp_m33, t0=0.0)


def test_seed_gradient_ordering(exp_p33, exp_m33, gs33):
    sp, _ = special_seed(+1, exp_p33, exp_m33)
    sm, _ = special_seed(-1, exp_p33, exp_m33)
    gq = np.sqrt(gs33.grad_sq)
    assert sp.norm_h1dot() > gq > sm.norm_h1dot()


def test_vk_vanishes_at_late_time(exp_p33):
    assert evaluate_Vk(exp_p33, 50 / exp_p33.e0).norm_h1() <= 1e-12


def test_leading_order_gap(exp_p33, gs33, pair33):
    """U(t) - e^{i w t} Q - e^{(i w - e0) t} Y+ = O(e^{-2 e0 t}): slope fit."""
    omega = gs33.params.omega
    grid = gs33.grid
    ts = np.linspace(1.2, 2.2, 8)
    gaps = []
    for t in ts:
        U = approximate_solution(exp_p33, t).values
        lead = np.exp(1j * omega * t) * (gs33.Q + np.exp(-pair33.e0 * t) * (pair33.Y1 + 1j * pair33.Y2))
        d = U - lead
        gaps.append(np.sqrt(np.sum(grid.w * np.abs(d) ** 2) + np.sum(grid.w * np.abs(grid.deriv(d)) ** 2)))
    slope = -np.polyfit(ts, np.log(gaps), 1)[0]
    assert slope == pytest.approx(2 * pair33.e0, rel=0.1)


def test_conserved_quantities_approach_Q(exp_p33, gs33):
    """M, E of U_k(t) approach (M(Q), E(Q)) at rate e^{-e0 t}."""
    params = gs33.params
    gaps_m, gaps_e, ts = [], [], np.array([1.5, 2.5])
    for t in ts:
        c = conserved(approximate_solution(exp_p33, t), params)
        gaps_m.append(abs(c.mass - gs33.mass))
        gaps_e.append(abs(c.energy - gs33.energy))
    ratio = np.exp(-exp_p33.e0 * (ts[1] - ts[0]))
    assert gaps_m[1] < 3 * gaps_m[0] * ratio
    assert gaps_e[1] < 3 * gaps_e[0] * ratio


def test_sign_structure_of_gradient_gap(exp_p33, exp_m33, gs33, pair33):
    """The gradient gap of U^A has the sign of A at large t."""
    t = np.log(1 / 0.02) / pair33.e0
    for exp, sign in ((exp_p33, 1.0), (exp_m33, -1.0)):
        U = approximate_solution(exp, t)
        assert np.sign(U.grad_sq() - gs33.grad_sq) == sign
