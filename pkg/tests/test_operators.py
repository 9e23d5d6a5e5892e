import numpy as np
import pytest

from wavescat import (ResolventSolve, SolverError, apply_multiplier,
                      builtin_medium, builtin_symbol, compose, free_operator,
                      identification_ops, identity_medium, make_grid,
                      make_medium, materialize, medium_operator,
                      perturbation_apply, resolvent_identity_residuals,
                      resolvent_solve, weighted_inner, weighted_norm)
from conftest import random_field


@pytest.fixture
def setup_1d():
    g = make_grid(d=1, n=64, L=4 * np.pi, k=1)
    sym = builtin_symbol("laplacian", 1)
    med = builtin_medium("bump", g, a=0.5, w=2.0)
    return g, sym, med


def test_multiplier_diagonalizes_plane_waves(setup_1d):
    g, sym, _ = setup_1d
    x = g.x_axes[0]
    xi0 = 2.0  # a lattice mode since pi/L = 1/4
    f = np.exp(1j * xi0 * x)[:, None]
    out = apply_multiplier(sym, g, f)
    np.testing.assert_allclose(out, xi0 ** 2 * f, atol=1e-12)


def test_multiplier_zero_field(setup_1d):
    g, sym, _ = setup_1d
    out = apply_multiplier(sym, g, np.zeros(g.spatial_shape + (1,)))
    assert np.all(out == 0)


def test_wave_symbol_rotates_fiber():
    g = make_grid(d=1, n=32, L=np.pi, k=2)
    sym = builtin_symbol("wave", 1)
    x = g.x_axes[0]
    f = np.zeros(g.spatial_shape + (2,), dtype=complex)
    f[:, 0] = np.exp(1j * x)
    out = apply_multiplier(sym, g, f)
    # at xi = 1 the block sends (1, 0) to (0, -i), scaled by |xi| = 1
    expected = np.zeros_like(f)
    expected[:, 1] = -1j * np.exp(1j * x)
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_linearity(setup_1d, rng):
    g, sym, med = setup_1d
    H = medium_operator(med, sym, g)
    f = random_field(g, rng)
    h = random_field(g, rng)
    lhs = H.apply(2.0 * f + 3.0j * h)
    rhs = 2.0 * H.apply(f) + 3.0j * H.apply(h)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(lhs)


def test_identity_medium_reduces_to_free(setup_1d, rng):
    g, sym, _ = setup_1d
    H = medium_operator(identity_medium(g), sym, g)
    f = random_field(g, rng)
    np.testing.assert_allclose(H.apply(f), apply_multiplier(sym, g, f),
                               atol=1e-13)


def test_metric_self_adjointness(setup_1d, rng):
    g, sym, med = setup_1d
    H = medium_operator(med, sym, g)
    for _ in range(5):
        f = random_field(g, rng)
        h = random_field(g, rng)
        a = weighted_inner(med, H.apply(f), h)
        b = weighted_inner(med, f, H.apply(h))
        assert abs(a - b) <= 1e-10 * max(abs(a), 1.0)


def test_constant_medium_scales_eigenvalues():
    g = make_grid(d=1, n=32, L=np.pi, k=1)
    H = medium_operator(builtin_medium("constant", g, value=2.0),
                        builtin_symbol("laplacian", 1), g)
    x = g.x_axes[0]
    f = np.exp(1j * 3.0 * x)[:, None]
    np.testing.assert_allclose(H.apply(f), (9.0 / 2.0) * f, atol=1e-12)


def test_free_resolvent_mode(setup_1d):
    g, sym, _ = setup_1d
    H00 = free_operator(sym, g)
    x = g.x_axes[0]
    f = np.exp(1j * 2.0 * x)[:, None]
    u = resolvent_solve(H00, 1j, f)
    np.testing.assert_allclose(u, f / (4.0 - 1j), atol=1e-12)


def test_resolvent_residual_iterative_and_dense(setup_1d, rng):
    g, sym, med = setup_1d
    H = medium_operator(med, sym, g)
    f = random_field(g, rng)
    for method in ("iterative", "dense"):
        cfg = ResolventSolve(tol=1e-10, method=method)
        u = resolvent_solve(H, 1j, f, cfg)
        res = weighted_norm(med, H.apply(u) - 1j * u - f) / weighted_norm(med, f)
        assert res <= 1e-10
        assert cfg.achieved_residual <= 1e-10


def test_real_shift_requires_dense(setup_1d, rng):
    g, sym, med = setup_1d
    H = medium_operator(med, sym, g)
    f = random_field(g, rng)
    with pytest.raises(SolverError):
        resolvent_solve(H, 0.5 + 0j, f, ResolventSolve(method="iterative"))
    # dense path works away from the discrete spectrum
    u = resolvent_solve(H, -1.0 + 0j, f, ResolventSolve(method="dense"))
    res = weighted_norm(med, H.apply(u) + u - f) / weighted_norm(med, f)
    assert res <= 1e-10


def test_resolvent_first_identity(setup_1d, rng):
    g, sym, med = setup_1d
    H = medium_operator(med, sym, g)
    f = random_field(g, rng)
    z, w = 0.7 + 1.3j, -0.4 + 0.9j
    cfg = ResolventSolve(tol=1e-12)
    rz = resolvent_solve(H, z, f, cfg)
    rw = resolvent_solve(H, w, f, cfg)
    rzw = resolvent_solve(H, z, resolvent_solve(H, w, f, cfg), cfg)
    lhs = rz - rw
    rhs = (z - w) * rzw
    assert weighted_norm(med, lhs - rhs) <= 1e-9 * weighted_norm(med, f)


def test_identity_residuals_null_case(rng):
    g = make_grid(d=1, n=64, L=4 * np.pi, k=1)
    sym = builtin_symbol("laplacian", 1)
    med = identity_medium(g)
    H = medium_operator(med, sym, g)
    H00 = free_operator(sym, g)
    f = random_field(g, rng)
    d1, d2, d3 = resolvent_identity_residuals(H, H00, med, 1j, f)
    assert max(d1, d2, d3) < 1e-11


def test_identity_residuals_bump_medium(rng):
    g = make_grid(d=1, n=256, L=16 * np.pi, k=1)
    sym = builtin_symbol("laplacian", 1)
    med = builtin_medium("rational", g, a=0.3, p=2.0)
    H = medium_operator(med, sym, g)
    H00 = free_operator(sym, g)
    f = random_field(g, rng)
    cfg = ResolventSolve(tol=1e-10)
    d1, d2, d3 = resolvent_identity_residuals(H, H00, med, 1j, f, cfg=cfg)
    assert max(d1, d2, d3) <= 1e-9


def test_identity_residuals_zero_field():
    g = make_grid(d=1, n=32, L=np.pi, k=1)
    sym = builtin_symbol("laplacian", 1)
    med = builtin_medium("bump", g, a=0.5, w=1.0)
    H = medium_operator(med, sym, g)
    H00 = free_operator(sym, g)
    f = np.zeros(g.spatial_shape + (1,))
    assert resolvent_identity_residuals(H, H00, med, 1j, f) == (0.0, 0.0, 0.0)


def test_identification_null_pair(grid1d):
    m = builtin_medium("bump", grid1d, a=0.4, w=1.0)
    pair = identification_ops(m, m)
    eye = np.broadcast_to(np.eye(1), m.values.shape)
    np.testing.assert_allclose(pair.i0_star_values, eye, atol=1e-13)


def test_identification_adjoint_relation(rng):
    g = make_grid(d=1, n=32, L=3.0, k=1)
    m0 = builtin_medium("bump", g, a=0.3, w=1.0)
    m = builtin_medium("rational", g, a=0.5, p=2.0)
    pair = identification_ops(m0, m)
    f = random_field(g, rng)
    h = random_field(g, rng)
    a = weighted_inner(m, pair.I0(f), h)
    b = weighted_inner(m0, f, pair.I0_star(h))
    assert abs(a - b) <= 1e-12 * abs(a)


def test_identification_scalar_example():
    g = make_grid(d=1, n=8, L=1.0, k=1)
    m0 = builtin_medium("constant", g, value=1.0)
    m = builtin_medium("constant", g, value=2.0)
    pair = identification_ops(m0, m)
    f = np.ones(g.spatial_shape + (1,), dtype=complex)
    np.testing.assert_allclose(pair.I0_star(f), 2.0 * f)


def test_isometry_identity_pointwise(rng):
    g = make_grid(d=1, n=32, L=5.0, k=1)
    m0 = builtin_medium("bump", g, a=0.3, w=1.0)
    m = builtin_medium("rational", g, a=0.5, p=2.0)
    pair = identification_ops(m0, m)
    f = random_field(g, rng)
    lhs = pair.I0_star(pair.I0(f)) - f
    m0inv_v = np.einsum("...ij,...jk->...ik", m0.inv_values, pair.v_values)
    rhs = np.einsum("...ij,...j->...i", m0inv_v, f)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_perturbation_apply_null(setup_1d, rng):
    g, sym, med = setup_1d
    H = medium_operator(med, sym, g)
    pair = identification_ops(med, med)
    out, defect = perturbation_apply(H, H, pair, random_field(g, rng))
    assert np.abs(out).max() < 1e-12 and defect < 1e-12


def test_perturbation_apply_random_media(rng):
    g = make_grid(d=1, n=64, L=6.0, k=1)
    sym = builtin_symbol("laplacian", 1)
    m0 = builtin_medium("bump", g, a=0.3, w=1.0)
    m = builtin_medium("rational", g, a=0.5, p=2.0)
    pair = identification_ops(m0, m)
    H = medium_operator(m, sym, g)
    H0 = medium_operator(m0, sym, g)
    _, defect = perturbation_apply(H, H0, pair, random_field(g, rng))
    assert defect < 1e-11


def test_perturbation_apply_on_background_eigenvector():
    g = make_grid(d=1, n=32, L=np.pi, k=1)
    sym = builtin_symbol("laplacian", 1)
    m0 = identity_medium(g)
    m = builtin_medium("bump", g, a=0.4, w=1.0)
    pair = identification_ops(m0, m)
    H = medium_operator(m, sym, g)
    H0 = medium_operator(m0, sym, g)
    x = g.x_axes[0]
    f = np.exp(1j * 2.0 * x)[:, None]      # H0 f = 4 f
    out, _ = perturbation_apply(H, H0, pair, f)
    expected = -4.0 * np.einsum("...ij,...j->...i", m.inv_values,
                                np.einsum("...ij,...j->...i",
                                          pair.v_values, f))
    np.testing.assert_allclose(out, expected, atol=1e-11)


def test_spectral_containment_dense():
    g = make_grid(d=1, n=48, L=5.0, k=1)
    sym = builtin_symbol("laplacian", 1)
    med = builtin_medium("bump", g, a=0.7, w=1.5)
    H = medium_operator(med, sym, g)
    from wavescat.operators import dense_h_matrix
    eigs = np.linalg.eigvals(dense_h_matrix(H))
    assert np.abs(eigs.imag).max() < 1e-9 * np.abs(eigs.real).max()


def test_norm_equivalence_transfer(rng):
    g = make_grid(d=1, n=32, L=4.0, k=1)
    m0 = builtin_medium("bump", g, a=0.3, w=1.0)
    m = builtin_medium("rational", g, a=0.6, p=2.0)
    f = random_field(g, rng)
    ratio = weighted_norm(m, f) / weighted_norm(m0, f)
    lo = np.sqrt(m.c0 / m0.c1)
    hi = np.sqrt(m.c1 / m0.c0)
    assert lo - 1e-12 <= ratio <= hi + 1e-12


def test_materialize_matches_apply(setup_1d, rng):
    g, sym, med = setup_1d
    H = medium_operator(med, sym, g)
    mat = materialize(H)
    f = random_field(g, rng)
    np.testing.assert_allclose(g.unflatten(mat @ g.flatten(f)), H.apply(f),
                               atol=1e-10)


def test_compose_order():
    g = make_grid(d=1, n=16, L=2.0, k=1)
    from wavescat import bracket_power_operator
    a = bracket_power_operator(g, "spatial", -1.0)
    b = bracket_power_operator(g, "spatial", -2.0)
    c = compose(a, b)
    f = np.ones(g.spatial_shape + (1,), dtype=complex)
    w = (1.0 + g.x_radius ** 2)
    np.testing.assert_allclose(c.apply(f)[..., 0], w ** -1.5, atol=1e-14)
