"""Singular-value analysis: Schatten norms, decay fits, compactness proxies.

On a finite grid every operator has finitely many singular values, so
class membership is judged by refinement stability of partial sums, never
by a single spectrum. Singular values of operators between weighted
spaces are computed after conjugating by the metric square roots, so they
match the declared inner products.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (ConfigurationError, DegenerateFitError,
                     InsufficientDataError)
from .grid import Grid
from .media import MediumField, weighted_norm
from .operators import (GridOperator, IdentificationPair, compose,
                        dense_resolvent_matrix, materialize,
                        multiplication_operator, resolvent_operator)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SingularSpectrum:
    """Nonincreasing singular values with provenance."""

    svals: np.ndarray
    source_dims: tuple
    method: str = "dense-svd"

    def __len__(self):
        return len(self.svals)


def _scale_rows(mat: np.ndarray, blocks: np.ndarray, grid: Grid) -> np.ndarray:
    npts, k, N = grid.npoints, grid.k, grid.dof
    return np.einsum("pij,pjn->pin", blocks.reshape(npts, k, k),
                     mat.reshape(npts, k, N)).reshape(N, N)


def _scale_cols(mat: np.ndarray, blocks: np.ndarray, grid: Grid) -> np.ndarray:
    npts, k, N = grid.npoints, grid.k, grid.dof
    return np.einsum("npj,pjk->npk", mat.reshape(N, npts, k),
                     blocks.reshape(npts, k, k)).reshape(N, N)


def metric_symmetrized(op_matrix: np.ndarray, grid: Grid,
                       metric: Optional[MediumField],
                       domain_metric: Optional[MediumField]) -> np.ndarray:
    """Conjugate a coordinate matrix so plain SVD gives metric s-values.

    For T mapping (H0, M0) to (H, M) the singular values are those of
    M^{1/2} T M0^{-1/2}; the uniform quadrature weight cancels.
    """
    mat = op_matrix
    if metric is not None and not metric.is_identity:
        mat = _scale_rows(mat, metric.sqrt_values, grid)
    if domain_metric is not None and not domain_metric.is_identity:
        mat = _scale_cols(mat, domain_metric.inv_sqrt_values, grid)
    return mat


def singular_values(op: GridOperator,
                    max_dof: Optional[int] = None) -> SingularSpectrum:
    """Full singular spectrum of a densifiable operator (dense SVD)."""
    mat = materialize(op, max_dof=max_dof)
    mat = metric_symmetrized(mat, op.grid, op.metric, op.domain_metric)
    svals = np.linalg.svd(mat, compute_uv=False)
    return SingularSpectrum(svals=svals, source_dims=mat.shape)


def schatten_norm(spectrum: SingularSpectrum, p: float) -> float:
    """(sum s_n^p)^{1/p}; p = inf gives the operator norm s_1."""
    if p == np.inf:
        return float(spectrum.svals[0]) if len(spectrum) else 0.0
    if p < 1:
        raise ValueError(f"Schatten exponent must satisfy p >= 1, got {p}")
    s = spectrum.svals
    if len(s) == 0 or s[0] == 0.0:
        return 0.0
    top = float(s[0])
    return top * float(np.sum((s / top) ** p)) ** (1.0 / p)


def partial_sum(spectrum: SingularSpectrum, p: float) -> float:
    """sum s_n^p (the membership functional, without the 1/p root)."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    return float(np.sum(spectrum.svals ** p))


def decay_exponent(spectrum: SingularSpectrum,
                   window: tuple) -> float:
    """Least-squares slope of log s_n versus log n over a 1-based window.

    ``window = (lo, hi)`` selects s_lo .. s_hi inclusive.
    """
    lo, hi = int(window[0]), int(window[1])
    if lo < 1 or hi > len(spectrum) or hi - lo + 1 < 8:
        raise InsufficientDataError(
            f"window [{lo}, {hi}] needs >= 8 indices inside the spectrum "
            f"of length {len(spectrum)}")
    s = spectrum.svals[lo - 1:hi]
    if np.any(s <= 0.0):
        raise DegenerateFitError("zero singular values inside the window")
    n = np.arange(lo, hi + 1, dtype=float)
    slope, _ = np.polyfit(np.log(n), np.log(s), 1)
    return float(slope)


def schatten_threshold(d: int, r: float, kappa: float, power: int) -> float:
    """Membership threshold p(r, n) = d / min(r, kappa n), clipped at 1."""
    if r <= 0 or kappa <= 0 or power < 1:
        raise ConfigurationError(
            f"need r > 0, kappa > 0, power >= 1; got {(r, kappa, power)}")
    return max(1.0, d / min(r, kappa * power))


@dataclass(frozen=True)
class MembershipReport:
    """Numerical proxy for Schatten-class membership of <x>^{-r} R(z)^n."""

    r: float
    power: int
    kappa: float
    d: int
    threshold_p: float
    fitted_decay_alpha: float
    partial_sums: dict
    refinement_ratio: Optional[float]
    spectrum: SingularSpectrum


def membership_report(op: GridOperator, r: float, power: int, kappa: float,
                      d: int, probes: Sequence[float] = (),
                      window: Optional[tuple] = None,
                      op_fine: Optional[GridOperator] = None) -> MembershipReport:
    """Analyze the operator the caller assembled as <x>^{-r} R(z)^power.

    Probes default to 1.1 times the clipped threshold. When a refined-grid
    twin ``op_fine`` is supplied, the relative change of the first probe's
    partial sum is recorded as the refinement ratio.
    """
    threshold = schatten_threshold(d, r, kappa, power)
    spectrum = singular_values(op)
    nvals = len(spectrum)
    if window is None:
        window = (10, max(18, min(100, nvals // 2)))
    alpha = decay_exponent(spectrum, window)
    plist = list(probes) if probes else [1.1 * threshold]
    sums = {float(p): partial_sum(spectrum, p) for p in plist}
    ratio = None
    if op_fine is not None:
        fine = singular_values(op_fine)
        p0 = float(plist[0])
        coarse_sum = sums[p0]
        fine_sum = partial_sum(fine, p0)
        ratio = abs(fine_sum - coarse_sum) / max(coarse_sum, 1e-300)
    return MembershipReport(r=float(r), power=int(power), kappa=float(kappa),
                            d=int(d), threshold_p=threshold,
                            fitted_decay_alpha=alpha, partial_sums=sums,
                            refinement_ratio=ratio, spectrum=spectrum)


def operator_norm_estimate(op: GridOperator, iters: int = 50,
                           seed: int = 0) -> float:
    """Power-iteration lower bound for the top singular value.

    Iterates T* T in the declared metrics; the Rayleigh quotient is a lower
    bound for s_1^2 and typically converges geometrically.
    """
    if iters < 1:
        raise ConfigurationError("iters must be >= 1")
    if op.adjoint_apply is None:
        raise ConfigurationError("operator has no adjoint_apply")
    grid = op.grid
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(grid.spatial_shape + (grid.k,)) \
        + 1j * rng.standard_normal(grid.spatial_shape + (grid.k,))
    dom = op.domain_metric
    v = v / weighted_norm(dom, v, grid=grid)
    est = 0.0
    prev = None
    for _ in range(iters):
        w = op.apply(v)
        u = op.adjoint_apply(w)
        # Rayleigh quotient (T*Tv, v)_dom = ||Tv||_cod^2 for unit v.
        est = np.sqrt(max(weighted_norm(op.metric, w, grid=grid) ** 2, 0.0))
        nrm = weighted_norm(dom, u, grid=grid)
        if nrm == 0.0:
            return 0.0
        v = u / nrm
        if prev is not None and abs(est - prev) <= 1e-14 * max(est, 1.0):
            break
        prev = est
    return float(est)


def compactness_defect(H: GridOperator, H0: GridOperator,
                       pair: IdentificationPair,
                       z: complex) -> SingularSpectrum:
    """Singular spectrum of R(z) I0 - I0 R0(z) between the weighted spaces.

    Decay of the spectrum toward zero under refinement is the numerical
    proxy for compactness of the resolvent difference; a flat tail flags a
    perturbation that does not vanish at infinity.
    """
    rz = dense_resolvent_matrix(H, z)
    r0z = dense_resolvent_matrix(H0, z)
    diff = rz - r0z
    mat = metric_symmetrized(diff, H.grid, pair.M, pair.M0)
    svals = np.linalg.svd(mat, compute_uv=False)
    return SingularSpectrum(svals=svals, source_dims=mat.shape)


def weighted_resolvent_operator(H: GridOperator, r: float, power: int,
                                z: complex) -> GridOperator:
    """Assemble <x>^{-r} R(z)^power as a dense-backed operator."""
    from .operators import bracket_power_operator
    weight = bracket_power_operator(H.grid, "spatial", -float(r))
    rop = resolvent_operator(H, z)
    ops = [weight] + [rop] * int(power)
    out = compose(*ops, label=f"<x>^-{r:g} R({z:g})^{power}")
    return GridOperator(grid=out.grid, apply=out.apply,
                        adjoint_apply=out.adjoint_apply,
                        metric=H.metric, domain_metric=H.domain_metric,
                        label=out.label)
