"""First-order reduction of m(x) u_tt = Lap u and energy-norm scattering.

The state is bold_u = ((-Lap)^{1/2} u, u_t); the reduction evolves it by
i M d(bold_u)/dt = P(D) bold_u with the half-wave symbol |xi| B and the
block weight M = diag(1, m). The conserved energy is the squared weighted
norm of the state. The constant mode of u is annihilated by the half
Laplacian, so u lives in the zero-mean sector; the constant mode of u_t
rides along unchanged and its energy is tracked separately.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, ShapeError
from .grid import Grid, make_grid
from .media import MediumField, make_medium
from .moeller import SpectralDecomposition, evolve, spectral_decomposition
from .operators import GridOperator, medium_operator
from .symbols import builtin_symbol


def _scalar_values(m, grid_like) -> np.ndarray:
    if isinstance(m, MediumField):
        if m.k != 1:
            raise ShapeError("wave media are scalar (k = 1 data)")
        return m.values[..., 0, 0]
    vals = np.asarray(m, dtype=float)
    if vals.shape != grid_like.spatial_shape:
        raise ShapeError(
            f"scalar medium shape {vals.shape} != {grid_like.spatial_shape}")
    return vals


def scalar_twin(grid: Grid) -> Grid:
    """The k=1 grid sharing the lattice of a k=2 system grid."""
    key = "scalar_twin"
    if grid.k == 1:
        return grid
    if key not in grid._cache:
        grid._cache[key] = make_grid(grid.d, grid.n, grid.L, 1)
    return grid._cache[key]


def half_laplacian(u: np.ndarray, grid: Grid) -> np.ndarray:
    """(-Lap)^{1/2} u via the |xi| multiplier on a scalar field."""
    axes = tuple(range(-grid.d, 0))
    uhat = np.fft.fftn(u, axes=axes)
    return np.fft.ifftn(grid.xi_radius_fft * uhat, axes=axes)


@dataclass(frozen=True, eq=False)
class WaveState:
    """Reduced first-order state ((-Lap)^{1/2} u, u_t) on a k=2 grid."""

    bold_u: np.ndarray          # (*spatial, 2) complex
    grid: Grid
    m_values: np.ndarray        # (*spatial,) scalar medium samples
    projected_constant: float = 0.0


def lift_initial_data(u0: np.ndarray, v0: np.ndarray, grid: Grid,
                      m=1.0, mean_tol: float = 1e-12) -> WaveState:
    """Lift (u(0), u_t(0)) to the first-order state.

    The half Laplacian annihilates the constant mode, so a nonzero mean of
    u0 is projected out (with a warning beyond ``mean_tol``) and recorded.
    """
    if grid.k != 2:
        raise ShapeError("wave states need a k=2 grid")
    u0 = np.asarray(u0, dtype=complex)
    v0 = np.asarray(v0, dtype=complex)
    if u0.shape != grid.spatial_shape or v0.shape != grid.spatial_shape:
        raise ShapeError("initial data must be scalar fields on the grid")
    mean = complex(u0.mean())
    scale = max(np.abs(u0).max(), 1.0)
    if abs(mean) > mean_tol * scale:
        warnings.warn(
            f"u0 has mean {mean:.3e}; the constant mode is invisible to "
            f"the half Laplacian and was projected out")
    mvals = (_scalar_values(m, grid) if not np.isscalar(m)
             else np.full(grid.spatial_shape, float(m)))
    bold = np.stack([half_laplacian(u0, grid), v0], axis=-1)
    return WaveState(bold_u=bold, grid=grid, m_values=mvals,
                     projected_constant=abs(mean))


def system_medium(m, grid: Grid, label: str = "") -> MediumField:
    """Block weight diag(1, m(x)) on the k=2 grid."""
    if grid.k != 2:
        raise ShapeError("system medium needs a k=2 grid")
    mvals = _scalar_values(m, grid) if not np.isscalar(m) \
        else np.full(grid.spatial_shape, float(m))
    vals = np.zeros(grid.spatial_shape + (2, 2))
    vals[..., 0, 0] = 1.0
    vals[..., 1, 1] = mvals
    return make_medium(vals, grid, label=label or "diag(1, m)")


def wave_system(m, grid: Grid) -> GridOperator:
    """H = M^{-1} P(D) for the half-wave symbol and M = diag(1, m(x))."""
    if grid.d > 3:
        raise ConfigurationError("the wave reduction is limited to d <= 3")
    if grid.k != 2:
        raise ShapeError("wave_system needs a k=2 grid")
    medium = system_medium(m, grid)
    symbol = builtin_symbol("wave", grid.d)
    return medium_operator(medium, symbol, grid)


def energy(m, state: WaveState) -> float:
    """||(-Lap)^{1/2} u||^2 + sum m(x) |u_t(x)|^2 h^d.

    Equals the squared weighted norm of the reduced state with the block
    weight diag(1, m).
    """
    grid = state.grid
    mvals = _scalar_values(m, grid) if not np.isscalar(m) \
        else float(m)
    quad = grid.quadrature_weight
    w = np.abs(state.bold_u[..., 0]) ** 2
    v = np.abs(state.bold_u[..., 1]) ** 2
    return float(quad * (w.sum() + np.sum(mvals * v)))


def zero_mode_energy(m, state: WaveState) -> float:
    """Energy carried by the constant mode of u_t (invariant in time)."""
    grid = state.grid
    mvals = _scalar_values(m, grid) if not np.isscalar(m) else float(m)
    vbar = state.bold_u[..., 1].mean()
    volume = (2.0 * grid.L) ** grid.d
    mbar = float(np.mean(mvals)) if not np.isscalar(mvals) else mvals
    return float(mbar * abs(vbar) ** 2 * volume)


@dataclass(frozen=True)
class ComparisonCurves:
    """Energy-norm comparison of perturbed and background evolutions."""

    times: np.ndarray
    half_lap_diff: np.ndarray     # ||(-Lap)^{1/2}(u - u0)(t)||
    velocity_diff: np.ndarray     # ||u_t - u0_t||
    energy_norm_diff: np.ndarray  # || e^{-iHt} f - e^{-iH0 t} f0 ||_H


def compare_solutions(m, m0, state: WaveState, state0: WaveState,
                      times,
                      dec: Optional[SpectralDecomposition] = None,
                      dec0: Optional[SpectralDecomposition] = None) -> ComparisonCurves:
    """Track the two component norms and the combined weighted norm.

    The two component curves vanish together exactly when the combined
    curve does; the weighted norm squeezes each component between the
    medium bounds c0, c1.
    """
    grid = state.grid
    if state0.grid is not grid and state0.grid.spatial_shape != grid.spatial_shape:
        raise ShapeError("states live on different grids")
    if dec is None:
        dec = spectral_decomposition(wave_system(m, grid))
    if dec0 is None:
        dec0 = spectral_decomposition(wave_system(m0, grid))
    medium = system_medium(m, grid)
    quad = grid.quadrature_weight
    times = np.asarray(times, dtype=float)
    d_half, d_vel, d_energy = [], [], []
    for t in times:
        w = evolve(dec, state.bold_u, t)
        w0 = evolve(dec0, state0.bold_u, t)
        diff = w - w0
        d_half.append(np.sqrt(quad * np.sum(np.abs(diff[..., 0]) ** 2)))
        d_vel.append(np.sqrt(quad * np.sum(np.abs(diff[..., 1]) ** 2)))
        d_energy.append(np.sqrt(quad * np.sum(
            (medium.matvec(diff) * diff.conj()).real)))
    return ComparisonCurves(times=times,
                            half_lap_diff=np.array(d_half),
                            velocity_diff=np.array(d_vel),
                            energy_norm_diff=np.array(d_energy))


def leapfrog_reference(m, grid_scalar: Grid, u0, v0, dt: float, t_end: float):
    """Second-order leapfrog for m u_tt = Lap u with spectral Laplacian.

    Returns (u, u_t, t) at the first step boundary >= t_end; u_t is the
    centered difference, accurate to O(dt^2). Used as an independent check
    of the first-order spectral reduction.
    """
    mvals = _scalar_values(m, grid_scalar) if not np.isscalar(m) \
        else float(m)
    axes = tuple(range(-grid_scalar.d, 0))
    xi2 = grid_scalar.xi_radius_fft ** 2

    def lap(u):
        return np.fft.ifftn(-xi2 * np.fft.fftn(u, axes=axes), axes=axes)

    nsteps = max(1, int(np.ceil(t_end / dt - 1e-12)))
    u_prev = np.asarray(u0, dtype=complex)
    u_cur = u_prev + dt * np.asarray(v0, dtype=complex) \
        + 0.5 * dt ** 2 * lap(u_prev) / mvals
    for _ in range(1, nsteps):
        u_next = 2.0 * u_cur - u_prev + dt ** 2 * lap(u_cur) / mvals
        u_prev, u_cur = u_cur, u_next
    # Centered velocity at t = nsteps * dt needs one step beyond.
    u_next = 2.0 * u_cur - u_prev + dt ** 2 * lap(u_cur) / mvals
    u_t = (u_next - u_prev) / (2.0 * dt)
    return u_cur, u_t, nsteps * dt


# -- Hilbert-Schmidt probes ---------------------------------------------------

def weighted_resolvent_hs_sq(m, grid: Grid, r: float, power: int = 1,
                             eta: float = 1.0) -> float:
    """Sum of squared singular values of <x>^{-r} R(i eta)^power.

    Exploits that H^2 for the wave system is block diagonal: with
    P = (-Lap)^{1/2}, the blocks are P m^{-1} P and m^{-1} P^2, both
    similar to real symmetric matrices of scalar-grid size. The weighted
    trace tr(W^2 (H^2 + eta^2)^{-power}) then needs two real eigensolves
    instead of a dense SVD of the doubled system, and equals the squared
    Hilbert-Schmidt-type sum exactly (in the weighted metric).

    Only purely imaginary shifts are supported; elsewhere H^2 does not
    capture R(z) R(z)*.
    """
    grid_s = scalar_twin(grid) if grid.k == 2 else grid
    mvals = (_scalar_values(m, grid_s) if not np.isscalar(m)
             else np.full(grid_s.spatial_shape, float(m))).ravel()
    if np.any(mvals <= 0):
        raise ConfigurationError("medium must be positive")
    minv = 1.0 / mvals

    def g(lam):
        return (np.maximum(lam, 0.0) + eta ** 2) ** (-float(power))

    import scipy.linalg as sla

    # Block 1: P m^{-1} P with P = (-Lap)^{1/2}, real symmetric.
    P = _dense_scalar_multiplier(grid_s, grid_s.xi_radius_fft,
                                 cache_key="half_laplacian_dense")
    b1 = P @ (minv[:, None] * P)
    del P
    b1 = 0.5 * (b1 + b1.T)
    lam1, q1 = sla.eigh(b1, overwrite_a=True, check_finite=False)
    del b1
    np.square(q1, out=q1)
    diag1 = q1 @ g(lam1)
    del q1
    # Block 2: m^{-1} P^2, similar to m^{-1/2} P^2 m^{-1/2}; the diagonal
    # of any function of it is insensitive to the diagonal similarity.
    c2 = _dense_scalar_multiplier(grid_s, grid_s.xi_radius_fft ** 2,
                                  cache_key="laplacian_dense")
    sm = np.sqrt(minv)
    if grid_s.npoints > 4096:
        c2 *= sm[:, None]
        c2 *= sm[None, :]
    else:
        c2 = sm[:, None] * c2 * sm[None, :]
    c2 = 0.5 * (c2 + c2.T)
    lam2, q2 = sla.eigh(c2, overwrite_a=True, check_finite=False)
    del c2
    np.square(q2, out=q2)
    diag2 = q2 @ g(lam2)
    del q2
    w2 = ((1.0 + grid_s.x_radius ** 2) ** (-float(r))).ravel()
    return float(np.sum(w2 * (diag1 + diag2)))


def _dense_scalar_multiplier(grid_s: Grid, values: np.ndarray,
                             cache_key: Optional[str] = None,
                             chunk: int = 512) -> np.ndarray:
    """Dense real-symmetric matrix of a real, even scalar multiplier.

    Cached on the grid only while small; above that the eigensolver's own
    workspace dominates memory and a stale copy would crowd it out.
    """
    cache_key = cache_key if grid_s.npoints <= 4096 else None
    if cache_key is not None and cache_key in grid_s._cache:
        return grid_s._cache[cache_key]
    npts = grid_s.npoints
    axes = tuple(range(-grid_s.d, 0))
    out = np.empty((npts, npts))
    for j0 in range(0, npts, chunk):
        j1 = min(j0 + chunk, npts)
        basis = np.zeros((j1 - j0, npts))
        basis[np.arange(j1 - j0), np.arange(j0, j1)] = 1.0
        basis = basis.reshape((j1 - j0,) + grid_s.spatial_shape)
        cols = np.fft.ifftn(values * np.fft.fftn(basis, axes=axes),
                            axes=axes)
        out[:, j0:j1] = cols.reshape(j1 - j0, npts).real.T
    out = 0.5 * (out + out.T)
    if cache_key is not None:
        grid_s._cache[cache_key] = out
    return out
