import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from threshold_lab.errors import InsufficientSamples, OutsideWindow, PhaseAmbiguity
from threshold_lab.grid import RadialField
from threshold_lab.modulation import decompose, default_window, delta, modulation_rates


def _orbit_point(gs, theta0, t, alpha=0.0):
    omega = gs.params.omega
    return RadialField(gs.grid, np.exp(1j * (theta0 + omega * t)) * (1 + alpha) * gs.Q)


def test_decompose_on_orbit(gs33):
    fr = decompose(_orbit_point(gs33, 0.3, 1.7), 1.7, gs33)
    assert fr.theta == pytest.approx(0.3, abs=1e-12)
    assert abs(fr.alpha) < 1e-12
    assert np.max(np.abs(fr.h)) < 1e-10
    assert fr.in_window


def test_decompose_recovers_alpha(gs33):
    a = 0.004
    fr = decompose(_orbit_point(gs33, -0.2, 0.0, alpha=a), 0.0, gs33)
    assert fr.alpha == pytest.approx(a, abs=1e-10)
    assert np.max(np.abs(fr.h)) < 1e-9


@given(theta0=st.floats(-3.0, 3.0), a=st.floats(-0.004, 0.004), t=st.floats(0.0, 5.0))
@settings(max_examples=30, deadline=None)
def test_decompose_gauge_property(gs33, theta0, a, t):
    fr = decompose(_orbit_point(gs33, theta0, t, alpha=a), t, gs33)
    # angles match mod 2 pi
    assert abs((fr.theta - theta0 + np.pi) % (2 * np.pi) - np.pi) < 1e-9
    assert fr.alpha == pytest.approx(a, abs=1e-9)


def test_orthogonality_of_remainder(gs33, exp_p33):
    """h satisfies the enforced discrete orthogonality to roundoff."""
    from threshold_lab.profiles import special_seed

    seed, t0 = special_seed(+1, exp_p33)
    fr = decompose(seed, 0.0, gs33)
    grid = gs33.grid
    w = grid.w
    dQ = grid.deriv(gs33.Q)
    h = fr.h
    assert abs(np.sum(w * grid.deriv(h).real * dQ)) < 1e-12 * gs33.grad_sq
    scale = max(np.sqrt(np.sum(w * np.abs(h) ** 2)) * np.sqrt(gs33.mass), 1e-300)
    # Im part orthogonal to Q is the phase condition
    assert abs(np.sum(w * h.imag * gs33.Q)) < 1e-9 * max(scale, gs33.mass * 1e-6)


def test_window_guard(gs33):
    u = 2.0 * gs33.as_field()
    assert delta(u, gs33) > default_window(gs33)
    with pytest.raises(OutsideWindow):
        decompose(u, 0.0, gs33)
    fr = decompose(u, 0.0, gs33, require_window=False)
    assert not fr.in_window


def test_phase_ambiguity(gs33):
    grid = gs33.grid
    w = grid.w
    f = grid.r * gs33.Q
    f = f - (np.sum(w * f * gs33.Q) / gs33.mass) * gs33.Q  # orthogonal to Q
    u = RadialField(grid, 1e-8 * f.astype(complex))
    with pytest.raises(PhaseAmbiguity):
        decompose(u, 0.0, gs33, require_window=False)


def test_modulation_rates_guard(gs33):
    frames = [decompose(_orbit_point(gs33, 0.1, t), t, gs33) for t in (0.0, 0.1)]
    with pytest.raises(InsufficientSamples):
        modulation_rates(frames)


def test_modulation_rates_on_slow_drift(gs33):
    """Frames from a slowly rotating orbit give bounded, flat rate series."""
    ts = np.linspace(0.0, 1.0, 9)
    frames = [decompose(_orbit_point(gs33, 0.05 * t, t, alpha=1e-4 * (1 + t)), t, gs33)
              for t in ts]
    rates = modulation_rates(frames)
    assert rates["n_frames"] == 9
    assert rates["max_over_median_alpha"] < 10
    assert rates["max_over_median_theta"] < 10
