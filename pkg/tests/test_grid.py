import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavescat import ConfigurationError, make_grid, weight_field
from conftest import random_field


def test_lattice_matches_hand_construction():
    g = make_grid(d=1, n=4, L=np.pi, k=1)
    np.testing.assert_allclose(g.x_axes[0], [-np.pi, -np.pi / 2, 0, np.pi / 2])
    np.testing.assert_allclose(g.xi_axes[0], [-2, -1, 0, 1])
    assert g.h == pytest.approx(np.pi / 2)


def test_odd_n_rejected():
    with pytest.raises(ConfigurationError, match="even"):
        make_grid(d=1, n=5, L=1.0, k=1)


@pytest.mark.parametrize("bad", [dict(d=4, n=8, L=1.0, k=1),
                                 dict(d=1, n=8, L=-1.0, k=1),
                                 dict(d=1, n=8, L=1.0, k=0),
                                 dict(d=1, n=2, L=1.0, k=1)])
def test_invalid_parameters_rejected(bad):
    with pytest.raises(ConfigurationError):
        make_grid(**bad)


def test_dof_counts_components():
    g = make_grid(d=2, n=8, L=10.0, k=2)
    assert g.dof == 2 * 8 ** 2


def test_transform_roundtrip(grid1d, rng):
    f = random_field(grid1d, rng)
    back = grid1d.to_space(grid1d.to_freq(f))
    assert np.linalg.norm(back - f) <= 1e-12 * np.linalg.norm(f)


def test_roundtrip_2d(grid2d, rng):
    f = random_field(grid2d, rng)
    back = grid2d.to_space(grid2d.to_freq(f))
    assert np.linalg.norm(back - f) <= 1e-12 * np.linalg.norm(f)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_parseval(seed):
    g = make_grid(d=1, n=32, L=2.0, k=1)
    f = random_field(g, np.random.default_rng(seed))
    space = g.l2_norm(f) ** 2
    freq = g.freq_norm(g.to_freq(f)) ** 2
    assert freq == pytest.approx(space, rel=1e-12)


def test_plane_wave_transforms_to_point_mass(grid1d):
    # A lattice mode concentrates on its own dual point.
    x = grid1d.x_axes[0]
    f = np.exp(1j * 2.0 * x)[:, None]
    fhat = grid1d.to_freq(f)[:, 0]
    rad = grid1d.xi_radius_fft
    hot = np.abs(fhat).argmax()
    assert grid1d.xi_fft_axes[0][hot] == pytest.approx(2.0)
    rest = np.abs(fhat).sum() - np.abs(fhat[hot])
    assert rest <= 1e-10 * np.abs(fhat[hot])


def test_weight_examples():
    g = make_grid(d=1, n=8, L=4.0, k=1)
    w0 = weight_field(g, "spatial", 0.0)
    assert np.all(w0.values == 1.0)
    w2 = weight_field(g, "spatial", 2.0)
    at_one = np.argmin(np.abs(g.x_axes[0] - 1.0))
    assert w2.values[at_one] == pytest.approx(0.5)
    w1 = weight_field(g, "spatial", 1.0)
    origin = np.argmin(np.abs(g.x_axes[0]))
    assert w1.values[origin] == 1.0


def test_weight_invariants(grid2d):
    w = weight_field(grid2d, "frequency", 1.5)
    assert np.all(w.values > 0) and np.all(w.values <= 1.0)
    # value 1 exactly at the origin, monotone along the radius
    rad = grid2d.xi_radius_fft
    assert w.values[rad == 0] == 1.0
    order = np.argsort(rad.ravel())
    vals = w.values.ravel()[order]
    radii = rad.ravel()[order]
    # nonincreasing in |xi| up to ties at equal radius
    for i in range(len(vals) - 1):
        if radii[i + 1] > radii[i]:
            assert vals[i + 1] <= vals[i] + 1e-15


def test_weight_product_law(grid1d):
    w1 = weight_field(grid1d, "spatial", 1.0)
    w2 = weight_field(grid1d, "spatial", 2.5)
    w3 = weight_field(grid1d, "spatial", 3.5)
    assert np.abs(w1.values * w2.values - w3.values).max() < 1e-14


def test_negative_exponent_rejected(grid1d):
    with pytest.raises(ValueError):
        weight_field(grid1d, "spatial", -1.0)


def test_refinement_keeps_coarse_lattice():
    g = make_grid(d=1, n=16, L=3.0, k=1)
    g2 = make_grid(d=1, n=32, L=3.0, k=1)
    coarse = g.x_axes[0]
    fine = g2.x_axes[0]
    assert np.allclose(fine[::2], coarse)


def test_boundary_leakage_monotone():
    g = make_grid(d=1, n=16, L=50.0, k=1)
    assert g.boundary_leakage(2.0) < g.boundary_leakage(1.0) < 1.0
    assert g.boundary_leakage(1.0) == pytest.approx((1 + 50.0 ** 2) ** -0.5)
