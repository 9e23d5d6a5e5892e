"""Matrix-free grid operators: P(D), H = M^{-1} P(D), resolvents.

Operators act on fields of shape (..., *spatial, k); leading batch axes
broadcast through every apply. Each operator declares the inner products
of its domain and codomain (None means plain L2); adjoints are always
taken with respect to those declared metrics.
"""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import (ConfigurationError, DenseCapError, ShapeError,
                     SolverError)
from .grid import Grid
from .media import MediumField, identity_medium, weighted_norm
from .symbols import MatrixSymbol, eval_symbol_on_grid

log = logging.getLogger(__name__)

DEFAULT_DENSE_CAP = 8192
_DENSE_CAP_ENV = "WAVESCAT_DENSE_CAP"


def dense_cap() -> int:
    """Degrees-of-freedom cap for dense materialization (env-overridable)."""
    raw = os.environ.get(_DENSE_CAP_ENV)
    if raw is None:
        return DEFAULT_DENSE_CAP
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(
            f"{_DENSE_CAP_ENV} must be an integer, got {raw!r}")


@dataclass(frozen=True, eq=False)
class GridOperator:
    """Linear map on grid fields with declared domain/codomain metrics.

    ``metric`` is the codomain inner product and ``domain_metric`` the
    domain one (None = plain L2). ``adjoint_apply`` implements the adjoint
    with respect to those metrics. ``symbol``/``medium`` are kept when the
    operator is an H = M^{-1} P(D) so resolvent machinery can precondition
    and materialize it.
    """

    grid: Grid
    apply: Callable[[np.ndarray], np.ndarray]
    adjoint_apply: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metric: Optional[MediumField] = None
    domain_metric: Optional[MediumField] = None
    label: str = ""
    symbol: Optional[MatrixSymbol] = None
    medium: Optional[MediumField] = None
    dense_factory: Optional[Callable[[], np.ndarray]] = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def densifiable(self) -> bool:
        return self.grid.dof <= dense_cap()

    def norm(self, f: np.ndarray, side: str = "codomain") -> float:
        metric = self.metric if side == "codomain" else self.domain_metric
        return weighted_norm(metric, f, grid=self.grid)


# -- multiplier application ------------------------------------------------

def apply_multiplier(symbol: MatrixSymbol, grid: Grid,
                     f: np.ndarray) -> np.ndarray:
    """Apply P(D): Fourier transform, multiply by A(xi), transform back."""
    mats = eval_symbol_on_grid(symbol, grid)
    fhat = np.fft.fftn(f, axes=grid._spatial_axes)
    ghat = np.einsum("...ij,...j->...i", mats, fhat)
    return np.fft.ifftn(ghat, axes=grid._spatial_axes)


def free_operator(symbol: MatrixSymbol, grid: Grid) -> GridOperator:
    """P(D) on plain L2; exactly self-adjoint after symbol symmetrization."""
    def ap(f):
        return apply_multiplier(symbol, grid, f)
    return GridOperator(grid=grid, apply=ap, adjoint_apply=ap,
                        metric=None, domain_metric=None,
                        label=f"P(D)[{symbol.name}]",
                        symbol=symbol, medium=None)


def medium_operator(medium: MediumField, symbol: MatrixSymbol,
                    grid: Grid) -> GridOperator:
    """H = M^{-1} P(D), self-adjoint in the M-weighted inner product."""
    if medium.grid is not grid:
        raise ShapeError("medium was built on a different grid")
    if symbol.k != grid.k:
        raise ShapeError(
            f"symbol fiber k={symbol.k} does not match grid k={grid.k}")
    minv = medium.inv_values

    def ap(f):
        return np.einsum("...ij,...j->...i", minv,
                         apply_multiplier(symbol, grid, f))

    return GridOperator(grid=grid, apply=ap, adjoint_apply=ap,
                        metric=medium, domain_metric=medium,
                        label=f"M^-1 P(D)[{symbol.name}; {medium.label}]",
                        symbol=symbol, medium=medium)


def multiplication_operator(values: np.ndarray, grid: Grid,
                            label: str = "mult") -> GridOperator:
    """Pointwise multiplication on plain L2.

    ``values`` is (*spatial,) scalar or (*spatial, k, k) matrix data.
    The adjoint multiplies by the conjugate transpose.
    """
    values = np.asarray(values)
    if values.shape == grid.spatial_shape:
        def ap(f):
            return values[..., None] * f
        def adj(f):
            return values.conj()[..., None] * f
    elif values.shape == grid.spatial_shape + (grid.k, grid.k):
        vh = np.swapaxes(values, -1, -2).conj()
        def ap(f):
            return np.einsum("...ij,...j->...i", values, f)
        def adj(f):
            return np.einsum("...ij,...j->...i", vh, f)
    else:
        raise ShapeError(f"multiplier shape {values.shape} not understood")
    return GridOperator(grid=grid, apply=ap, adjoint_apply=adj, label=label)


def bracket_power_operator(grid: Grid, domain: str, power: float) -> GridOperator:
    """Multiplication by <x>^power or <xi>^power (any real power).

    Frequency brackets act as Fourier multipliers; spatial brackets act
    pointwise. Both are plain-L2 self-adjoint.
    """
    if domain == "spatial":
        vals = (1.0 + grid.x_radius ** 2) ** (power / 2.0)
        op = multiplication_operator(vals, grid,
                                     label=f"<x>^{power:g}")
        return op
    if domain == "frequency":
        vals = (1.0 + grid.xi_radius_fft ** 2) ** (power / 2.0)

        def ap(f):
            fhat = np.fft.fftn(f, axes=grid._spatial_axes)
            return np.fft.ifftn(vals[..., None] * fhat,
                                axes=grid._spatial_axes)
        return GridOperator(grid=grid, apply=ap, adjoint_apply=ap,
                            label=f"<xi>^{power:g}")
    raise ConfigurationError(f"unknown bracket domain {domain!r}")


def smooth_freq_multiplier(grid: Grid, func, label: str = "b(xi)") -> GridOperator:
    """Scalar Fourier multiplier b(xi) from a callable on |xi| values."""
    vals = np.asarray(func(grid.xi_radius_fft), dtype=complex)

    def ap(f):
        fhat = np.fft.fftn(f, axes=grid._spatial_axes)
        return np.fft.ifftn(vals[..., None] * fhat, axes=grid._spatial_axes)

    def adj(f):
        fhat = np.fft.fftn(f, axes=grid._spatial_axes)
        return np.fft.ifftn(vals.conj()[..., None] * fhat,
                            axes=grid._spatial_axes)

    return GridOperator(grid=grid, apply=ap, adjoint_apply=adj, label=label)


def compose(*ops: GridOperator, label: str = "") -> GridOperator:
    """Composition applying the last operator first (matrix order)."""
    if not ops:
        raise ConfigurationError("compose needs at least one operator")
    grid = ops[0].grid
    chain = list(ops)

    def ap(f):
        for op in reversed(chain):
            f = op.apply(f)
        return f

    adjoints = [op.adjoint_apply for op in chain]
    if all(a is not None for a in adjoints):
        def adj(f):
            for a in adjoints:
                f = a(f)
            return f
    else:
        adj = None
    return GridOperator(grid=grid, apply=ap, adjoint_apply=adj,
                        metric=chain[0].metric,
                        domain_metric=chain[-1].domain_metric,
                        label=label or " @ ".join(o.label for o in chain))


# -- dense materialization --------------------------------------------------

def materialize(op: GridOperator, max_dof: Optional[int] = None,
                chunk: int = 512) -> np.ndarray:
    """Coordinate matrix of the operator via batched basis application.

    Refuses above the dense cap unless ``max_dof`` raises it explicitly.
    """
    N = op.grid.dof
    cap = dense_cap() if max_dof is None else max_dof
    if N > cap:
        raise DenseCapError(
            f"dense materialization of {N} dof exceeds the cap {cap} "
            f"(override via {_DENSE_CAP_ENV} or max_dof)")
    if op.dense_factory is not None:
        return op.dense_factory()
    out = np.empty((N, N), dtype=complex)
    eye = np.eye(N, dtype=complex)
    for j0 in range(0, N, chunk):
        j1 = min(j0 + chunk, N)
        basis = op.grid.unflatten(eye[j0:j1])
        out[:, j0:j1] = op.grid.flatten(op.apply(basis)).T
    return out


def dense_pd_matrix(symbol: MatrixSymbol, grid: Grid) -> np.ndarray:
    """Dense coordinate matrix of P(D), cached on the grid."""
    key = ("pd_dense", symbol)
    if key not in grid._cache:
        mat = materialize(free_operator(symbol, grid), max_dof=grid.dof)
        mat = 0.5 * (mat + mat.conj().T)
        if np.abs(mat.imag).max() <= 1e-14 * max(np.abs(mat.real).max(), 1.0):
            mat = mat.real.copy()
        grid._cache[key] = mat
    return grid._cache[key]


def dense_h_matrix(op: GridOperator) -> np.ndarray:
    """Dense coordinate matrix of H = M^{-1} P(D) (or P(D) when M = I)."""
    if op.symbol is None:
        return materialize(op, max_dof=op.grid.dof)
    key = "h_dense"
    if key not in op._cache:
        pd = dense_pd_matrix(op.symbol, op.grid)
        if op.medium is None or op.medium.is_identity:
            op._cache[key] = pd
        else:
            grid = op.grid
            npts, k = grid.npoints, grid.k
            minv = op.medium.inv_values.reshape(npts, k, k)
            h = np.einsum("pij,pjq->piq", minv,
                          pd.reshape(npts, k, grid.dof))
            op._cache[key] = h.reshape(grid.dof, grid.dof)
    return op._cache[key]


def dense_resolvent_matrix(op: GridOperator, z: complex) -> np.ndarray:
    """Dense (H - z)^{-1}, cached per shift."""
    key = ("resolvent_dense", complex(z))
    if key not in op._cache:
        h = dense_h_matrix(op)
        a = h.astype(complex, copy=True)
        idx = np.arange(a.shape[0])
        a[idx, idx] -= complex(z)
        op._cache[key] = np.linalg.inv(a)
    return op._cache[key]


def resolvent_operator(op: GridOperator, z: complex) -> GridOperator:
    """R(z) as a dense-backed operator (for diagnostics under the cap)."""
    if op.grid.dof > dense_cap():
        raise DenseCapError(
            f"resolvent operator needs dense factorization; {op.grid.dof} "
            f"dof exceeds the cap {dense_cap()}")
    rmat = dense_resolvent_matrix(op, z)
    rmat_bar = None
    grid = op.grid

    def ap(f):
        return grid.unflatten(grid.flatten(f) @ rmat.T)

    def adj(f):
        # H self-adjoint in its metric, so R(z)* = R(conj z) in that metric.
        nonlocal rmat_bar
        if rmat_bar is None:
            rmat_bar = dense_resolvent_matrix(op, np.conj(z))
        return grid.unflatten(grid.flatten(f) @ rmat_bar.T)

    return GridOperator(grid=grid, apply=ap, adjoint_apply=adj,
                        metric=op.metric, domain_metric=op.domain_metric,
                        label=f"R({z:g})[{op.label}]",
                        symbol=op.symbol, medium=op.medium,
                        dense_factory=lambda: rmat)


# -- resolvent solves --------------------------------------------------------

@dataclass
class ResolventSolve:
    """Solve configuration and outcome for (H - z) u = f.

    ``method``: 'auto' tries the preconditioned Krylov solve and falls back
    to a dense factorization under the cap; 'iterative' and 'dense' force a
    path. After a call, ``achieved_residual`` and ``iterations_used`` (and
    ``z``) describe what happened.
    """

    tol: float = 1e-10
    max_iter: int = 400
    method: str = "auto"
    allow_real_shift: bool = False
    z: Optional[complex] = None
    achieved_residual: Optional[float] = None
    iterations_used: Optional[int] = None
    used_dense: bool = False


def _free_resolvent_stack(symbol: MatrixSymbol, grid: Grid,
                          z: complex) -> np.ndarray:
    key = ("free_resolvent", symbol, complex(z))
    if key not in grid._cache:
        mats = eval_symbol_on_grid(symbol, grid).astype(complex, copy=True)
        idx = np.arange(grid.k)
        mats = mats.copy()
        mats[..., idx, idx] -= complex(z)
        grid._cache[key] = np.linalg.inv(mats)
    return grid._cache[key]


def apply_free_resolvent(symbol: MatrixSymbol, grid: Grid, z: complex,
                         f: np.ndarray) -> np.ndarray:
    """(P(D) - z)^{-1} f, exact (diagonal per Fourier mode)."""
    stack = _free_resolvent_stack(symbol, grid, z)
    fhat = np.fft.fftn(f, axes=grid._spatial_axes)
    ghat = np.einsum("...ij,...j->...i", stack, fhat)
    return np.fft.ifftn(ghat, axes=grid._spatial_axes)


def resolvent_solve(op: GridOperator, z: complex, f: np.ndarray,
                    cfg: Optional[ResolventSolve] = None) -> np.ndarray:
    """Solve (H - z) u = f to ||(H - z) u - f|| <= tol ||f|| in the H metric.

    Krylov path: left-precondition by the free resolvent (P(D) - z)^{-1},
    which turns the system into I - z R00 (M - I), a bounded perturbation
    of the identity.
    """
    if cfg is None:
        cfg = ResolventSolve()
    z = complex(z)
    cfg.z = z
    if op.symbol is None:
        raise ConfigurationError(
            "resolvent_solve needs an operator built from a symbol")
    grid = op.grid
    medium = op.medium
    fnorm = weighted_norm(op.metric, f, grid=grid)
    if fnorm == 0.0:
        cfg.achieved_residual = 0.0
        cfg.iterations_used = 0
        return np.zeros_like(f, dtype=complex)

    def residual_of(u):
        return (weighted_norm(op.metric, op.apply(u) - z * u - f, grid=grid)
                / fnorm)

    if medium is None or medium.is_identity:
        # H = P(D): the free resolvent is exact, mode by mode.
        u = apply_free_resolvent(op.symbol, grid, z, f)
        cfg.achieved_residual = residual_of(u)
        cfg.iterations_used = 0
        return u

    if z.imag == 0.0:
        if cfg.method in ("auto", "dense") and op.densifiable:
            cfg.method = "dense"
        elif cfg.allow_real_shift:
            warnings.warn("real shift without dense fallback; the Krylov "
                          "solve may stagnate near the spectrum")
        else:
            raise SolverError(
                "real shift z requires the dense path or allow_real_shift")

    if cfg.method == "dense":
        return _dense_solve(op, z, f, cfg, residual_of)

    # Right-preconditioned system: (I - z (M - I) R00) w = M f, u = R00 w,
    # so the Krylov residual controls the true residual up to 1/c0.
    mvals = medium.values
    eye = np.eye(grid.k)

    def precond_system(w):
        r00w = apply_free_resolvent(op.symbol, grid, z, w)
        return w - z * np.einsum("...ij,...j->...i", mvals - eye, r00w)

    b = medium.matvec(f).astype(complex)
    linop = spla.LinearOperator(
        (grid.dof, grid.dof), dtype=complex,
        matvec=lambda v: grid.flatten(precond_system(grid.unflatten(v))))
    bvec = grid.flatten(b)

    iters = 0
    def count(_):
        nonlocal iters
        iters += 1

    rtol = min(cfg.tol / 10.0, 1e-8)
    x0 = None
    res = np.inf
    for _ in range(3):
        x, _info = spla.gmres(linop, bvec, x0=x0, rtol=rtol, atol=0.0,
                              restart=min(cfg.max_iter, 200),
                              maxiter=max(1, cfg.max_iter // 10),
                              callback=count, callback_type="pr_norm")
        u = apply_free_resolvent(op.symbol, grid, z, grid.unflatten(x))
        res = residual_of(u)
        cfg.achieved_residual = res
        cfg.iterations_used = iters
        if res <= cfg.tol:
            return u
        x0 = x
        rtol *= 1e-2
    if cfg.method == "auto" and op.densifiable:
        log.info("Krylov resolvent stalled at %.2e; using dense fallback", res)
        return _dense_solve(op, z, f, cfg, residual_of)
    raise SolverError(
        f"resolvent solve reached residual {res:.3e} > tol {cfg.tol:.1e} "
        f"after {iters} iterations",
        achieved_residual=res, iterations=iters)


def _dense_solve(op, z, f, cfg, residual_of):
    if not op.densifiable:
        raise DenseCapError(
            f"dense resolvent needs {op.grid.dof} dof <= cap {dense_cap()}")
    key = ("resolvent_lu", complex(z))
    if key not in op._cache:
        h = dense_h_matrix(op).astype(complex, copy=True)
        idx = np.arange(h.shape[0])
        h[idx, idx] -= complex(z)
        op._cache[key] = sla.lu_factor(h)
    grid = op.grid
    u = grid.unflatten(sla.lu_solve(op._cache[key], grid.flatten(f)))
    cfg.used_dense = True
    cfg.achieved_residual = residual_of(u)
    cfg.iterations_used = cfg.iterations_used or 0
    if cfg.achieved_residual > cfg.tol:
        raise SolverError(
            f"dense resolvent residual {cfg.achieved_residual:.3e} exceeds "
            f"tol {cfg.tol:.1e} (z too close to the discrete spectrum?)",
            achieved_residual=cfg.achieved_residual)
    return u


# -- identification operators ------------------------------------------------

@dataclass(frozen=True, eq=False)
class IdentificationPair:
    """The identical embedding between the M0- and M-weighted spaces.

    I0 and I1 leave coordinates untouched; the metric adjoints are the
    pointwise multiplications I0* = M0^{-1} M and I1* = M^{-1} M0.
    """

    M0: MediumField
    M: MediumField
    i0_star_values: np.ndarray
    i1_star_values: np.ndarray

    def I0(self, f: np.ndarray) -> np.ndarray:
        return f

    def I1(self, f: np.ndarray) -> np.ndarray:
        return f

    def I0_star(self, f: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.i0_star_values, f)

    def I1_star(self, f: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...j->...i", self.i1_star_values, f)

    @property
    def v_values(self) -> np.ndarray:
        """Perturbation V = M - M0 pointwise."""
        return self.M.values - self.M0.values


def identification_ops(M0: MediumField, M: MediumField) -> IdentificationPair:
    """Build I0, I1 and their metric adjoints for a pair of media."""
    if M0.grid is not M.grid:
        raise ShapeError("identification pair needs media on one grid")
    i0s = np.einsum("...ij,...jk->...ik", M0.inv_values, M.values)
    i1s = np.einsum("...ij,...jk->...ik", M.inv_values, M0.values)
    return IdentificationPair(M0=M0, M=M, i0_star_values=i0s,
                              i1_star_values=i1s)


def perturbation_apply(H: GridOperator, H0: GridOperator,
                       pair: IdentificationPair, f: np.ndarray):
    """(H I0 - I0 H0) f and its defect against -M^{-1} V H0 f.

    The two expressions agree identically; the defect is pure rounding and
    solver noise, reported relative to ||f|| in the background metric.
    """
    out = H.apply(f) - H0.apply(f)
    h0f = H0.apply(f)
    expected = -np.einsum("...ij,...j->...i", pair.M.inv_values,
                          np.einsum("...ij,...j->...i", pair.v_values, h0f))
    fnorm = weighted_norm(pair.M0, f)
    if fnorm == 0.0:
        return out, 0.0
    defect = weighted_norm(pair.M, out - expected) / fnorm
    return out, float(defect)


def resolvent_identity_residuals(H: GridOperator, H00: GridOperator,
                                 medium: MediumField, z: complex,
                                 f: np.ndarray,
                                 H0: Optional[GridOperator] = None,
                                 medium0: Optional[MediumField] = None,
                                 cfg: Optional[ResolventSolve] = None):
    """Relative defects of the three textbook resolvent identities.

      (a)  R = R00 (M + z (M - I) R)
      (b)  R = (I - z R (M^{-1} - I)) R00 M
      (c)  R - R0 = R M^{-1} V (I + z R0)

    For (c) the background defaults to the free medium M0 = I (H0 = H00).
    Defects are measured in plain L2 relative to ||R f||; f = 0 gives zeros.
    """
    grid = H.grid
    if medium0 is None:
        medium0 = identity_medium(grid)
    if H0 is None:
        H0 = H00
    base_cfg = cfg or ResolventSolve()

    def solve(op, rhs):
        local = ResolventSolve(tol=base_cfg.tol, max_iter=base_cfg.max_iter,
                               method=base_cfg.method,
                               allow_real_shift=base_cfg.allow_real_shift)
        return resolvent_solve(op, z, rhs, local)

    rf = solve(H, f)
    scale = grid.l2_norm(rf)
    if scale == 0.0:
        return 0.0, 0.0, 0.0
    mvals = medium.values
    eye = np.eye(grid.k)

    # (a)
    inner = medium.matvec(f) + z * np.einsum("...ij,...j->...i",
                                             mvals - eye, rf)
    rhs_a = apply_free_resolvent(H.symbol, grid, z, inner)
    d1 = grid.l2_norm(rf - rhs_a) / scale

    # (b)
    r00mf = apply_free_resolvent(H.symbol, grid, z, medium.matvec(f))
    minv_m_eye = medium.inv_values - eye
    rhs_b = r00mf - z * solve(H, np.einsum("...ij,...j->...i",
                                           minv_m_eye, r00mf))
    d2 = grid.l2_norm(rf - rhs_b) / scale

    # (c)
    r0f = solve(H0, f)
    vvals = medium.values - medium0.values
    arg = f + z * r0f
    rhs_c = solve(H, np.einsum("...ij,...j->...i", medium.inv_values,
                               np.einsum("...ij,...j->...i", vvals, arg)))
    d3 = grid.l2_norm(rf - r0f - rhs_c) / scale
    return float(d1), float(d2), float(d3)
