import numpy as np
import pytest

from wavescat import (ShapeError, builtin_symbol, compare_solutions,
                      compose, bracket_power_operator, energy, evolve,
                      lift_initial_data, make_grid, resolvent_operator,
                      singular_values, spectral_decomposition, system_medium,
                      wave_system, weighted_norm, weighted_resolvent_hs_sq,
                      zero_mode_energy, leapfrog_reference)
from wavescat.wave_equation import half_laplacian, scalar_twin


@pytest.fixture
def wave_grid():
    return make_grid(d=1, n=64, L=np.pi, k=2)


def test_lift_sine(wave_grid):
    x = wave_grid.x_axes[0]
    state = lift_initial_data(np.sin(x), np.zeros_like(x), wave_grid)
    np.testing.assert_allclose(state.bold_u[:, 0], np.sin(x), atol=1e-12)
    np.testing.assert_allclose(state.bold_u[:, 1], 0.0, atol=1e-14)


def test_lift_velocity_only(wave_grid):
    x = wave_grid.x_axes[0]
    g = np.exp(-x ** 2)
    g = g - g.mean()  # not required for v0, just symmetry of the check
    state = lift_initial_data(np.zeros_like(x), g, wave_grid)
    np.testing.assert_allclose(state.bold_u[:, 1], g, atol=1e-14)
    assert np.abs(state.bold_u[:, 0]).max() < 1e-14


def test_lift_double_frequency(wave_grid):
    x = wave_grid.x_axes[0]
    state = lift_initial_data(np.cos(2 * x), np.zeros_like(x), wave_grid)
    np.testing.assert_allclose(state.bold_u[:, 0], 2.0 * np.cos(2 * x),
                               atol=1e-12)


def test_lift_warns_on_nonzero_mean(wave_grid):
    x = wave_grid.x_axes[0]
    with pytest.warns(UserWarning, match="mean"):
        state = lift_initial_data(1.0 + np.sin(x), np.zeros_like(x),
                                  wave_grid)
    assert state.projected_constant == pytest.approx(1.0)


def test_wave_system_free_spectrum(wave_grid):
    H = wave_system(1.0, wave_grid)
    dec = spectral_decomposition(H)
    xi = wave_grid.xi_axes[0]
    expected = np.sort(np.concatenate([np.abs(xi), -np.abs(xi)]))
    np.testing.assert_allclose(np.sort(dec.eigenvalues), expected, atol=1e-9)


def test_wave_system_constant_heavy_medium(wave_grid):
    H = wave_system(4.0, wave_grid)
    dec = spectral_decomposition(H)
    xi = wave_grid.xi_axes[0]
    expected = np.sort(np.concatenate([np.abs(xi) / 2.0, -np.abs(xi) / 2.0]))
    np.testing.assert_allclose(np.sort(dec.eigenvalues), expected, atol=1e-9)


def test_wave_system_self_adjointness(wave_grid, rng):
    from conftest import random_field
    from wavescat import weighted_inner
    m = 1.0 + 0.3 * (1.0 + wave_grid.x_radius) ** -2.0
    H = wave_system(m, wave_grid)
    med = H.medium
    f = random_field(wave_grid, rng)
    g = random_field(wave_grid, rng)
    a = weighted_inner(med, H.apply(f), g)
    b = weighted_inner(med, f, H.apply(g))
    assert abs(a - b) <= 1e-10 * abs(a)


def test_wave_system_shape_gates(wave_grid):
    with pytest.raises(ShapeError):
        wave_system(1.0, make_grid(d=1, n=16, L=1.0, k=1))


def test_energy_zero_state(wave_grid):
    x = wave_grid.x_axes[0]
    state = lift_initial_data(np.zeros_like(x), np.zeros_like(x), wave_grid)
    assert energy(1.0, state) == 0.0


def test_standing_wave_energy_pi():
    g = make_grid(d=1, n=64, L=np.pi, k=2)
    x = g.x_axes[0]
    state = lift_initial_data(np.sin(x), np.zeros_like(x), g)
    assert energy(1.0, state) == pytest.approx(np.pi, abs=1e-8)
    # the energy stays pi along the evolution of the explicit solution
    H = wave_system(1.0, g)
    dec = spectral_decomposition(H)
    for t in (0.4, 1.3, 7.0):
        evolved = evolve(dec, state.bold_u, t)
        moved = type(state)(bold_u=evolved, grid=g,
                            m_values=state.m_values)
        assert energy(1.0, moved) == pytest.approx(np.pi, abs=1e-8)
        # cross-check against the closed-form standing wave
        np.testing.assert_allclose(evolved[:, 0].real,
                                   np.cos(t) * np.sin(x), atol=1e-9)
        np.testing.assert_allclose(evolved[:, 1].real,
                                   -np.sin(t) * np.sin(x), atol=1e-9)


def test_energy_equals_weighted_norm(wave_grid, rng):
    m = 1.0 + 0.5 * np.exp(-wave_grid.x_radius ** 2)
    med = system_medium(m, wave_grid)
    from conftest import random_field
    bold = random_field(wave_grid, rng)
    state = lift_initial_data(np.zeros(wave_grid.spatial_shape),
                              np.zeros(wave_grid.spatial_shape), wave_grid,
                              m=m)
    state = type(state)(bold_u=bold, grid=wave_grid, m_values=state.m_values)
    assert energy(m, state) == pytest.approx(
        weighted_norm(med, bold) ** 2, rel=1e-12)


def test_energy_conservation_inhomogeneous():
    g = make_grid(d=1, n=128, L=8 * np.pi, k=2)
    x = g.x_axes[0]
    m = 1.0 + 0.3 * (1.0 + np.abs(x)) ** -2.0
    H = wave_system(m, g)
    dec = spectral_decomposition(H)
    v0 = np.exp(-x ** 2) * np.exp(2j * x)
    state = lift_initial_data(np.zeros_like(x), v0, g, m=m)
    e0 = energy(m, state)
    drift = 0.0
    for t in np.linspace(0.0, 100.0, 9):
        evolved = evolve(dec, state.bold_u, t)
        et = energy(m, type(state)(bold_u=evolved, grid=g, m_values=state.m_values))
        drift = max(drift, abs(et - e0) / e0)
    assert drift < 1e-9


def test_zero_mode_invariance():
    g = make_grid(d=1, n=64, L=np.pi, k=2)
    x = g.x_axes[0]
    m = 1.0 + 0.2 * np.exp(-x ** 2)
    H = wave_system(m, g)
    dec = spectral_decomposition(H)
    v0 = 0.7 + 0.0 * x      # pure constant velocity mode
    state = lift_initial_data(np.zeros_like(x), v0, g, m=m)
    e_zero = zero_mode_energy(m, state)
    for t in (0.5, 3.0):
        evolved = evolve(dec, state.bold_u, t)
        moved = type(state)(bold_u=evolved, grid=g, m_values=state.m_values)
        # the constant mode rides along unchanged
        assert zero_mode_energy(m, moved) == pytest.approx(e_zero, rel=1e-9)
        np.testing.assert_allclose(evolved[:, 1], v0, atol=1e-9)


def test_reduction_matches_leapfrog_at_second_order():
    g = make_grid(d=1, n=64, L=np.pi, k=2)
    gs = scalar_twin(g)
    x = g.x_axes[0]
    m = 1.0 + 0.4 * np.exp(-x ** 2)
    H = wave_system(m, g)
    dec = spectral_decomposition(H)
    u0 = np.sin(x) + 0.3 * np.cos(2 * x) - 0.3 * np.cos(2 * x).mean()
    u0 = u0 - u0.mean()
    v0 = 0.2 * np.sin(3 * x)
    state = lift_initial_data(u0, v0, g, m=m)
    errs = []
    for dt in (0.02, 0.01):
        u_lf, ut_lf, t_end = leapfrog_reference(m, gs, u0, v0, dt, 1.0)
        evolved = evolve(dec, state.bold_u, t_end)
        err = np.abs(evolved[:, 1] - ut_lf).max()
        errs.append(err)
    assert 3.0 <= errs[0] / errs[1] <= 5.0


def test_compare_solutions_identical_dynamics():
    g = make_grid(d=1, n=64, L=4 * np.pi, k=2)
    x = g.x_axes[0]
    m = 1.0 + 0.3 * (1.0 + np.abs(x)) ** -2.0
    state = lift_initial_data(np.zeros_like(x),
                              np.exp(-x ** 2) * np.exp(2j * x), g, m=m)
    curves = compare_solutions(m, m, state, state, times=[0.0, 1.0, 5.0])
    assert curves.half_lap_diff.max() < 1e-9
    assert curves.velocity_diff.max() < 1e-9
    assert curves.energy_norm_diff.max() < 1e-9


def test_compare_solutions_norm_squeeze():
    g = make_grid(d=1, n=64, L=4 * np.pi, k=2)
    x = g.x_axes[0]
    m = 1.0 + 0.3 * (1.0 + np.abs(x)) ** -2.0
    m0 = np.ones_like(x)
    state0 = lift_initial_data(np.zeros_like(x),
                               np.exp(-x ** 2) * np.exp(2j * x), g, m=m0)
    state = lift_initial_data(np.zeros_like(x),
                              0.9 * np.exp(-x ** 2) * np.exp(2j * x), g, m=m)
    curves = compare_solutions(m, m0, state, state0, times=[0.0, 0.7, 2.0])
    med = system_medium(m, g)
    c0, c1 = med.c0, med.c1
    for comp in (curves.half_lap_diff, curves.velocity_diff):
        assert np.all(comp <= curves.energy_norm_diff / np.sqrt(c0) + 1e-12)
    combined_sq = curves.half_lap_diff ** 2 + c0 * curves.velocity_diff ** 2
    assert np.all(curves.energy_norm_diff ** 2 >= combined_sq - 1e-12)


def test_hs_fast_path_matches_dense_svd_1d():
    g = make_grid(d=1, n=64, L=8 * np.pi, k=2)
    x = g.x_radius
    m = 1.0 + 0.3 * (1.0 + x) ** -2.0
    H = wave_system(m, g)
    for power in (1, 2):
        op = compose(bracket_power_operator(g, "spatial", -1.0),
                     *([resolvent_operator(H, 1j)] * power))
        op = type(op)(grid=op.grid, apply=op.apply,
                      adjoint_apply=op.adjoint_apply,
                      metric=H.metric, domain_metric=H.metric,
                      label=op.label)
        dense_sum = float(np.sum(singular_values(op).svals ** 2))
        fast = weighted_resolvent_hs_sq(m, g, r=1.0, power=power)
        assert fast == pytest.approx(dense_sum, rel=1e-8)


def test_hs_fast_path_matches_dense_svd_2d():
    g = make_grid(d=2, n=12, L=6.0, k=2)
    m = 1.0 + 0.3 * (1.0 + g.x_radius) ** -2.0
    H = wave_system(m, g)
    op = compose(bracket_power_operator(g, "spatial", -1.0),
                 resolvent_operator(H, 1j), resolvent_operator(H, 1j))
    op = type(op)(grid=op.grid, apply=op.apply,
                  adjoint_apply=op.adjoint_apply,
                  metric=H.metric, domain_metric=H.metric, label=op.label)
    dense_sum = float(np.sum(singular_values(op).svals ** 2))
    fast = weighted_resolvent_hs_sq(m, g, r=1.0, power=2)
    assert fast == pytest.approx(dense_sum, rel=1e-8)


def test_half_laplacian_annihilates_constants(wave_grid):
    out = half_laplacian(np.ones(wave_grid.spatial_shape), wave_grid)
    assert np.abs(out).max() < 1e-13
