import numpy as np
import pytest

from threshold_lab.diagnostics import (
    Verdict,
    _phi_pieces,
    classify,
    make_cutoff,
    tail_rho,
    virial_quantities,
)
from threshold_lab.errors import CutoffOutOfDomain
from threshold_lab.evolve import TrajectoryRecord
from threshold_lab.grid import RadialField, make_grid


def _record(stop, snapshots=None, snapshot_times=None, grad=1.0):
    n = 3
    return TrajectoryRecord(
        times=np.linspace(0, 1, n), M_trace=np.ones(n), E_trace=np.ones(n),
        gradnorm_trace=np.full(n, grad), delta_trace=np.zeros(n),
        dt_trace=np.full(n, 1e-4), stop_reason=stop, direction="forward",
        absorbed_mass=0.0, snapshot_times=snapshot_times or [],
        snapshots=snapshots or [],
    )


def test_phi_pieces_shape():
    s = np.linspace(0.0, 3.0, 4001)[1:]
    phi, d1, d2, d3, d4 = _phi_pieces(s)
    assert np.allclose(phi[s <= 1], s[s <= 1] ** 2)
    assert np.allclose(phi[s >= 2], 2.0)
    assert np.all(d2 <= 2.0 + 1e-9)
    # the bridge must dip below zero curvature to reach the plateau
    assert np.min(d2) < 0


def test_phi_derivative_chain():
    """Each returned derivative is the FD derivative of the previous one."""
    s = np.linspace(0.5, 2.5, 200001)
    ds = s[1] - s[0]
    phi, d1, d2, d3, d4 = _phi_pieces(s)
    for lower, upper in ((phi, d1), (d1, d2), (d2, d3), (d3, d4)):
        fd = np.gradient(lower, ds)
        scale = max(np.max(np.abs(upper)), 1.0)
        # interior comparison; np.gradient is O(ds^2)
        assert np.max(np.abs(fd[2:-2] - upper[2:-2])) < 1e-5 * scale


def test_phi_smooth_joins():
    """C^1 through C^4 continuity at s = 1 and s = 2."""
    for s0 in (1.0, 2.0):
        eps = 1e-7
        left = _phi_pieces(np.array([s0 - eps]))
        right = _phi_pieces(np.array([s0 + eps]))
        for L, R in zip(left, right):
            assert abs(L[0] - R[0]) < 1e-5


def test_make_cutoff_domain(gs33):
    with pytest.raises(CutoffOutOfDomain):
        make_cutoff(gs33.grid.Rmax, gs33.grid)
    with pytest.raises(CutoffOutOfDomain):
        make_cutoff(-1.0, gs33.grid)


def test_cutoff_grid_mismatch(gs33, params33):
    other = make_grid(3, 256, 30.0)
    cut = make_cutoff(10.0, other)
    with pytest.raises(CutoffOutOfDomain):
        virial_quantities(gs33.as_field(), cut, params33, gs33)


def test_virial_standing_wave(gs33, params33):
    """A_R and y'' vanish on the standing wave once R covers the core."""
    om = params33.omega
    for Rfac in (10.0, 12.0):
        cut = make_cutoff(Rfac / np.sqrt(om), gs33.grid)
        yR, yRp, yRpp, AR = virial_quantities(gs33.as_field(), cut, params33, gs33)
        assert abs(AR) < 1e-6
        assert abs(yRpp) < 1e-6
        assert abs(yRp) < 1e-10  # real field: zero momentum flux
        assert yR > 0


def test_virial_matches_unlocalized_variance(gs33, params33):
    """For R far beyond the support, y_R -> int |x|^2 |u|^2."""
    grid = gs33.grid
    u = RadialField(grid, np.exp(-grid.r**2).astype(complex))
    cut = make_cutoff(grid.Rmax / 2.5, grid)
    yR, *_ = virial_quantities(u, cut, params33, gs33)
    exact = grid.integrate(grid.r**2 * np.exp(-2 * grid.r**2))
    assert yR == pytest.approx(float(exact), rel=1e-10)


def test_tail_rho(gs33, params33):
    grid = gs33.grid
    # exponentially decaying Q has tiny tail; a far bump has a large one
    small = tail_rho(gs33.as_field(), 20.0, params33)
    bump = RadialField(grid, np.exp(-((grid.r - 24.0) ** 2)).astype(complex))
    big = tail_rho(bump, 20.0, params33)
    assert small < 1e-8
    assert big > 1e3 * small
    with pytest.raises(CutoffOutOfDomain):
        tail_rho(gs33.as_field(), grid.Rmax, params33)


def test_classify_stop_reasons(gs33, pair33):
    assert classify(_record("blowup"), gs33, pair33).verdict == "blowup"
    assert classify(_record("dispersal_proxy"), gs33, pair33).verdict == "disperses"
    assert classify(_record("numerical_failure"), gs33, pair33).verdict == "undetermined"


def test_classify_on_orbit(gs33, pair33, params33):
    from threshold_lab.evolve import EvolutionConfig, evolve

    cfg = EvolutionConfig(dt0=2e-4, T=0.2, record_stride=100, snapshot_stride=100)
    rec = evolve(gs33.as_field(), cfg, params33, gs=gs33)
    v = classify(rec, gs33, pair33)
    assert v.verdict == "converges_to_Q"
    assert v.evidence["stop_reason"] == "horizon"
    assert "proxy_label" in v.evidence


def test_classify_far_from_orbit(gs33, pair33):
    """Horizon stop with no snapshots near the orbit -> undetermined."""
    rec = _record("horizon", grad=50.0)
    v = classify(rec, gs33, pair33)
    assert v.verdict == "undetermined"
