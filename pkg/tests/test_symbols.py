import numpy as np
import pytest

from wavescat import (ConfigurationError, InsufficientDataError, builtin_symbol,
                      ellipticity_report, eval_symbol, hermiticity_defect,
                      make_grid, min_abs_eigenvalue, polynomial_symbol)

WAVE_BLOCK = np.array([[0, 1j], [-1j, 0]])


def test_wave_symbol_at_unit_frequency():
    s = builtin_symbol("wave", 3)
    np.testing.assert_allclose(eval_symbol(s, (1.0, 0.0, 0.0)), WAVE_BLOCK)


def test_laplacian_at_origin_vanishes():
    s = builtin_symbol("laplacian", 2)
    assert eval_symbol(s, (0.0, 0.0)) == pytest.approx(0.0)


def test_dirac_at_origin_eigenvalues():
    s = builtin_symbol("dirac1d", 1)
    mat = eval_symbol(s, 0.0)
    np.testing.assert_allclose(mat, [[0, 1], [1, 0]])
    # independent 2x2 eigencomputation
    w = np.linalg.eigvalsh(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(sorted(w), [-1, 1])
    assert min_abs_eigenvalue(s, 0.0) == pytest.approx(1.0)


def test_unknown_name_rejected():
    with pytest.raises(ConfigurationError):
        builtin_symbol("heat", 1)
    with pytest.raises(ConfigurationError):
        builtin_symbol("dirac1d", 2)


def test_eval_examples():
    lap = builtin_symbol("laplacian", 1)
    assert eval_symbol(lap, 2.0)[0, 0] == pytest.approx(4.0)
    wave = builtin_symbol("wave", 2)
    np.testing.assert_allclose(eval_symbol(wave, (3.0, 4.0)), 5 * WAVE_BLOCK)
    dirac = builtin_symbol("dirac1d", 1)
    np.testing.assert_allclose(eval_symbol(dirac, 1.0), [[1, 1], [1, -1]])


def test_min_abs_eigenvalue_examples():
    lap = builtin_symbol("laplacian", 1)
    assert min_abs_eigenvalue(lap, 3.0) == pytest.approx(9.0)
    wave = builtin_symbol("wave", 2)
    assert min_abs_eigenvalue(wave, (0.0, 2.0)) == pytest.approx(2.0)
    dirac = builtin_symbol("dirac1d", 1)
    assert min_abs_eigenvalue(dirac, 2.0) == pytest.approx(np.sqrt(5.0))


def test_min_abs_eigenvalue_cross_check_svd():
    # same number through an independent decomposition
    for name, d, xi in [("wave", 2, (0.7, -1.3)), ("dirac1d", 1, 0.9),
                        ("laplacian", 3, (1.0, 2.0, -1.0))]:
        s = builtin_symbol(name, d)
        mat = eval_symbol(s, xi)
        by_eig = min_abs_eigenvalue(s, xi)
        by_svd = np.linalg.svd(mat, compute_uv=False).min()
        assert by_eig == pytest.approx(by_svd, abs=1e-10)


def test_homogeneity_scaling():
    wave = builtin_symbol("wave", 2)
    lap = builtin_symbol("laplacian", 2)
    xi = np.array([0.4, -0.9])
    for t in (0.5, 2.0, 7.3):
        assert min_abs_eigenvalue(wave, t * xi) == pytest.approx(
            t ** 1 * min_abs_eigenvalue(wave, xi), rel=1e-10)
        assert min_abs_eigenvalue(lap, t * xi) == pytest.approx(
            t ** 2 * min_abs_eigenvalue(lap, xi), rel=1e-10)


def test_hermiticity_defect_small():
    for name, d in [("laplacian", 1), ("wave", 3), ("dirac1d", 1)]:
        s = builtin_symbol(name, d)
        assert hermiticity_defect(s, np.ones(d)) < 1e-12


def test_ellipticity_fit_laplacian():
    g = make_grid(d=1, n=64, L=np.pi, k=1)
    rep = ellipticity_report(builtin_symbol("laplacian", 1), g, xi_min=1.0)
    assert rep.fitted_kappa == pytest.approx(2.0, abs=1e-6)
    assert rep.satisfied and rep.fitted_c > 0


def test_ellipticity_fit_wave_2d():
    g = make_grid(d=2, n=32, L=np.pi, k=2)
    rep = ellipticity_report(builtin_symbol("wave", 2), g, xi_min=1.0)
    assert rep.fitted_kappa == pytest.approx(1.0, abs=1e-6)


def test_ellipticity_dirac_approaches_order_one():
    g = make_grid(d=1, n=256, L=np.pi, k=2)
    s = builtin_symbol("dirac1d", 1)
    fits = [ellipticity_report(s, g, xi_min=x).fitted_kappa
            for x in (1.0, 8.0, 32.0)]
    errs = [abs(f - 1.0) for f in fits]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 5e-4


def test_ellipticity_insufficient_data():
    g = make_grid(d=1, n=16, L=np.pi, k=1)
    with pytest.raises(InsufficientDataError):
        ellipticity_report(builtin_symbol("laplacian", 1), g,
                           xi_min=0.95 * g.xi_radius_fft.max())


def test_polynomial_symbol_matches_dirac():
    coeffs = {(1,): [[1.0, 0.0], [0.0, -1.0]],
              (0,): [[0.0, 1.0], [1.0, 0.0]]}
    s = polynomial_symbol(coeffs, d=1, k=2)
    ref = builtin_symbol("dirac1d", 1)
    for xi in (-2.0, 0.3, 5.0):
        np.testing.assert_allclose(eval_symbol(s, xi), eval_symbol(ref, xi))
    assert s.order == 1.0
