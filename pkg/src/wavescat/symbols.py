"""Matrix symbols A(xi) of constant-coefficient operators.

A symbol maps a frequency point to a Hermitian k x k matrix. Built-ins
cover the second-order scalar case A(xi) = |xi|^2, the first-order 2x2
half-wave system A(xi) = |xi| * [[0, i], [-i, 0]] (not smooth at the
origin) and a 1-d Dirac-type example. Arbitrary matrix polynomials can be
assembled from coefficient tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InsufficientDataError, SymbolEvalError
from .grid import Grid

WAVE_BLOCK = np.array([[0.0, 1.0j], [-1.0j, 0.0]])


@dataclass(frozen=True, eq=False)
class MatrixSymbol:
    """Frequency-to-matrix map with ellipticity metadata.

    ``eval_batch`` takes an array of frequency points with trailing axis of
    length d and returns the matrices with two extra trailing axes (k, k).
    ``order`` is the declared growth order kappa, or None when unknown.
    ``smooth_at_origin`` is False for symbols with a |xi|-type kink; it
    gates boundedness diagnostics near xi = 0 but no spectral operation.
    """

    name: str
    d: int
    k: int
    order: Optional[float]
    smooth_at_origin: bool
    eval_batch: Callable[[np.ndarray], np.ndarray]


def _as_points(xi, d):
    pts = np.asarray(xi, dtype=float)
    if d == 1 and pts.ndim == 0:
        pts = pts[None]
    if pts.shape[-1] != d:
        raise ConfigurationError(
            f"frequency point has {pts.shape[-1]} components, symbol has d={d}")
    return pts


def builtin_symbol(name: str, d: int) -> MatrixSymbol:
    """One of the named symbols: laplacian, wave, dirac1d."""
    if name == "laplacian":
        def ev(pts):
            r2 = np.sum(pts ** 2, axis=-1)
            return r2[..., None, None].astype(complex)
        return MatrixSymbol("laplacian", d, 1, 2.0, True, ev)
    if name == "wave":
        def ev(pts):
            r = np.sqrt(np.sum(pts ** 2, axis=-1))
            return r[..., None, None] * WAVE_BLOCK
        return MatrixSymbol("wave", d, 2, 1.0, False, ev)
    if name == "dirac1d":
        if d != 1:
            raise ConfigurationError("dirac1d is one-dimensional")
        def ev(pts):
            xi = pts[..., 0]
            out = np.empty(xi.shape + (2, 2), dtype=complex)
            out[..., 0, 0] = xi
            out[..., 0, 1] = 1.0
            out[..., 1, 0] = 1.0
            out[..., 1, 1] = -xi
            return out
        return MatrixSymbol("dirac1d", 1, 2, 1.0, True, ev)
    raise ConfigurationError(f"unknown builtin symbol {name!r}")


def polynomial_symbol(coeffs: dict, d: int, k: int,
                      order: Optional[float] = None,
                      name: str = "polynomial") -> MatrixSymbol:
    """Matrix polynomial sum_alpha C_alpha xi^alpha from a coefficient table.

    ``coeffs`` maps multi-indices (tuples of length d) to k x k arrays.
    """
    table = []
    for alpha, mat in coeffs.items():
        alpha = tuple(int(a) for a in (alpha if np.iterable(alpha) else (alpha,)))
        if len(alpha) != d:
            raise ConfigurationError(
                f"multi-index {alpha} does not match d={d}")
        mat = np.asarray(mat, dtype=complex)
        if mat.shape != (k, k):
            raise ConfigurationError(
                f"coefficient for {alpha} has shape {mat.shape}, expected {(k, k)}")
        table.append((alpha, mat))
    if order is None:
        order = float(max((sum(a) for a, _ in table), default=0))

    def ev(pts):
        out = np.zeros(pts.shape[:-1] + (k, k), dtype=complex)
        for alpha, mat in table:
            mono = np.ones(pts.shape[:-1])
            for ax, power in enumerate(alpha):
                if power:
                    mono = mono * pts[..., ax] ** power
            out += mono[..., None, None] * mat
        return out

    return MatrixSymbol(name, d, k, order, True, ev)


def eval_symbol(sym: MatrixSymbol, xi) -> np.ndarray:
    """Evaluate at one frequency point, enforcing Hermiticity.

    Returns (A + A*)/2; use :func:`hermiticity_defect` to inspect how much
    symmetrization changed the raw value.
    """
    pts = _as_points(xi, sym.d)
    raw = sym.eval_batch(pts)
    if not np.all(np.isfinite(raw)):
        raise SymbolEvalError(f"symbol {sym.name!r} non-finite at xi={xi}")
    return 0.5 * (raw + np.swapaxes(raw, -1, -2).conj())


def hermiticity_defect(sym: MatrixSymbol, xi) -> float:
    """Elementwise max of |A - A*| relative to max |A| at one point."""
    raw = sym.eval_batch(_as_points(xi, sym.d))
    scale = np.abs(raw).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(raw - np.swapaxes(raw, -1, -2).conj()).max() / scale)


def eval_symbol_on_grid(sym: MatrixSymbol, grid: Grid) -> np.ndarray:
    """Symbol matrices on the FFT-ordered dual lattice, (*spatial, k, k).

    Cached on the grid; the symmetrization defect of the raw values is
    stored alongside under the key ``("symbol_defect", sym)``.
    """
    if sym.k != grid.k:
        raise ConfigurationError(
            f"symbol fiber k={sym.k} does not match grid k={grid.k}")
    if sym.d != grid.d:
        raise ConfigurationError(
            f"symbol dimension d={sym.d} does not match grid d={grid.d}")
    key = ("symbol_on_grid", sym)
    if key not in grid._cache:
        raw = sym.eval_batch(grid.xi_mesh_fft)
        if not np.all(np.isfinite(raw)):
            raise SymbolEvalError(
                f"symbol {sym.name!r} non-finite on the dual lattice")
        herm = 0.5 * (raw + np.swapaxes(raw, -1, -2).conj())
        scale = np.abs(raw).max()
        defect = 0.0 if scale == 0 else float(
            np.abs(raw - np.swapaxes(raw, -1, -2).conj()).max() / scale)
        grid._cache[key] = herm
        grid._cache[("symbol_defect", sym)] = defect
    return grid._cache[key]


def min_abs_eigenvalue(sym: MatrixSymbol, xi) -> float:
    """Smallest absolute eigenvalue of A(xi).

    Equals the smallest singular value since the evaluated matrix is
    Hermitian.
    """
    mat = eval_symbol(sym, xi)
    return float(np.abs(np.linalg.eigvalsh(mat)).min())


def _min_abs_eig_batch(mats: np.ndarray) -> np.ndarray:
    return np.abs(np.linalg.eigvalsh(mats)).min(axis=-1)


@dataclass(frozen=True)
class EllipticityReport:
    """Power-law fit of the eigenvalue floor nu(xi) over |xi| >= xi_min."""

    fitted_kappa: float
    fitted_c: float
    min_nu_over_lattice: float
    satisfied: bool
    n_points: int
    xi_min: float


def ellipticity_report(sym: MatrixSymbol, grid: Grid,
                       xi_min: float) -> EllipticityReport:
    """Fit nu(xi) ~ c |xi|^kappa on lattice points with |xi| >= xi_min.

    ``satisfied`` requires a strictly positive floor over the fitted range,
    i.e. the fitted power law certifies a nonzero constant.
    """
    rad = grid.xi_radius_fft.ravel()
    if xi_min <= 0 or xi_min >= rad.max():
        raise ConfigurationError(
            f"xi_min must lie in (0, max |xi|={rad.max():.3g})")
    mats = eval_symbol_on_grid(sym, grid).reshape(-1, sym.k, sym.k)
    mask = rad >= xi_min
    if mask.sum() < 8:
        raise InsufficientDataError(
            f"only {int(mask.sum())} lattice points beyond xi_min={xi_min}")
    nu = _min_abs_eig_batch(mats[mask])
    r = rad[mask]
    positive = nu > 0
    if positive.sum() < 8:
        raise InsufficientDataError("nu vanishes on almost all fit points")
    slope, intercept = np.polyfit(np.log(r[positive]), np.log(nu[positive]), 1)
    fitted_kappa = float(slope)
    fitted_c = float(np.exp(intercept))
    satisfied = bool(positive.all())
    return EllipticityReport(
        fitted_kappa=fitted_kappa,
        fitted_c=fitted_c if satisfied else 0.0,
        min_nu_over_lattice=float(nu.min()),
        satisfied=satisfied,
        n_points=int(mask.sum()),
        xi_min=float(xi_min),
    )
