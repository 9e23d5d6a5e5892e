"""Periodic-box discretization with spatial and dual frequency lattices.

The box is [-L, L)^d sampled on n points per axis, so the spacing is
h = 2L/n and the dual lattice is xi = pi*m/L with m = -n/2 .. n/2-1.
Fields are complex arrays of shape (*spatial, k) where spatial = (n,)*d
and k is the number of components per point; any number of leading batch
axes is allowed throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

_TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class Grid:
    """Periodic lattice of dimension d with fiber dimension k.

    Attributes
    ----------
    d : spatial dimension (1, 2 or 3).
    n : points per axis (even).
    L : half-length of the box [-L, L)^d.
    k : components per lattice point.
    """

    d: int
    n: int
    L: float
    k: int
    _cache: dict = field(default_factory=dict, repr=False)

    # -- lattice geometry ---------------------------------------------------

    @property
    def h(self) -> float:
        """Spatial lattice spacing 2L/n."""
        return 2.0 * self.L / self.n

    @property
    def spatial_shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def npoints(self) -> int:
        return self.n ** self.d

    @property
    def dof(self) -> int:
        """Total degrees of freedom k * n^d."""
        return self.k * self.n ** self.d

    @property
    def quadrature_weight(self) -> float:
        """Weight h^d of the trapezoidal (exact, periodic) quadrature."""
        return self.h ** self.d

    @property
    def frequency_weight(self) -> float:
        """Cell volume (pi/L)^d of the dual lattice."""
        return (np.pi / self.L) ** self.d

    @property
    def x_axes(self) -> tuple:
        """Per-axis spatial points -L + j*h, monotone."""
        return self._cached("x_axes", lambda: tuple(
            -self.L + self.h * np.arange(self.n) for _ in range(self.d)))

    @property
    def xi_axes(self) -> tuple:
        """Per-axis dual points pi*m/L for m = -n/2 .. n/2-1, monotone."""
        return self._cached("xi_axes", lambda: tuple(
            (np.pi / self.L) * np.arange(-self.n // 2, self.n // 2)
            for _ in range(self.d)))

    @property
    def x_mesh(self) -> np.ndarray:
        """Spatial points as an array of shape (*spatial, d)."""
        return self._cached("x_mesh", lambda: np.stack(
            np.meshgrid(*self.x_axes, indexing="ij"), axis=-1))

    @property
    def x_radius(self) -> np.ndarray:
        """|x| on the lattice, shape (*spatial,)."""
        return self._cached("x_radius",
                            lambda: np.linalg.norm(self.x_mesh, axis=-1))

    @property
    def xi_fft_axes(self) -> tuple:
        """Per-axis dual points in FFT storage order."""
        return self._cached("xi_fft_axes", lambda: tuple(
            (np.pi / self.L) * np.fft.fftfreq(self.n, 1.0 / self.n)
            for _ in range(self.d)))

    @property
    def xi_mesh_fft(self) -> np.ndarray:
        """Dual lattice in FFT order, shape (*spatial, d)."""
        return self._cached("xi_mesh_fft", lambda: np.stack(
            np.meshgrid(*self.xi_fft_axes, indexing="ij"), axis=-1))

    @property
    def xi_radius_fft(self) -> np.ndarray:
        """|xi| in FFT order, shape (*spatial,)."""
        return self._cached("xi_radius_fft",
                            lambda: np.linalg.norm(self.xi_mesh_fft, axis=-1))

    def _cached(self, name, build):
        if name not in self._cache:
            self._cache[name] = build()
        return self._cache[name]

    # -- transforms ---------------------------------------------------------

    @property
    def _spatial_axes(self) -> tuple:
        # Fields are (..., *spatial, k); spatial axes counted from the end.
        return tuple(range(-self.d - 1, -1))

    @property
    def _freq_phase(self) -> np.ndarray:
        # exp(-i xi_m * (-L)) = (-1)^(m1+...+md) relative to the DFT with
        # index origin at the first sample; makes to_freq the quadrature of
        # the continuum transform on [-L, L)^d.
        def build():
            m = np.fft.fftfreq(self.n, 1.0 / self.n).astype(int)
            sign = np.where(m % 2 == 0, 1.0, -1.0)
            out = sign
            for _ in range(self.d - 1):
                out = np.multiply.outer(out, sign)
            return out[..., None]
        return self._cached("freq_phase", build)

    def to_freq(self, f: np.ndarray) -> np.ndarray:
        """Forward transform (2pi)^{-d/2} * h^d * sum_x e^{-i<x,xi>} f(x).

        Output is indexed on the FFT-ordered dual lattice.
        """
        fhat = np.fft.fftn(f, axes=self._spatial_axes)
        scale = (self.h / np.sqrt(_TWO_PI)) ** self.d
        return scale * self._freq_phase * fhat

    def to_space(self, fhat: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`to_freq`."""
        scale = (self.h / np.sqrt(_TWO_PI)) ** self.d
        return np.fft.ifftn(fhat * self._freq_phase.conj() / scale,
                            axes=self._spatial_axes)

    # -- inner products -----------------------------------------------------

    def l2_inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """Plain L2 pairing sum_x <f(x), g(x)> h^d, antilinear in g."""
        return complex(self.quadrature_weight * np.sum(f * g.conj()))

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.quadrature_weight)
                     * np.linalg.norm(f.ravel()))

    def freq_norm(self, fhat: np.ndarray) -> float:
        return float(np.sqrt(self.frequency_weight)
                     * np.linalg.norm(fhat.ravel()))

    def flatten(self, f: np.ndarray) -> np.ndarray:
        """Field (..., *spatial, k) -> coordinate vector (..., k*n^d)."""
        return np.reshape(f, f.shape[:-self.d - 1] + (self.dof,))

    def unflatten(self, v: np.ndarray) -> np.ndarray:
        return np.reshape(v, v.shape[:-1] + self.spatial_shape + (self.k,))

    def boundary_leakage(self, r: float) -> float:
        """Value of <x>^{-r} at |x| = L.

        The torus truncates a decaying envelope; this is how much of it is
        still alive at the seam. Scenario diagnostics warn when it exceeds
        the configured threshold.
        """
        return float((1.0 + self.L ** 2) ** (-r / 2.0))


def make_grid(d: int, n: int, L: float, k: int = 1) -> Grid:
    """Build a periodic grid, validating every construction parameter."""
    if d not in (1, 2, 3):
        raise ConfigurationError(f"d must be 1, 2 or 3, got {d}")
    if n % 2 != 0 or n < 4:
        raise ConfigurationError(f"n must be even and >= 4, got {n}")
    if not L > 0:
        raise ConfigurationError(f"L must be positive, got {L}")
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    return Grid(d=int(d), n=int(n), L=float(L), k=int(k))


@dataclass(frozen=True, eq=False)
class WeightField:
    """Pointwise <.>^{-r} = (1 + |.|^2)^{-r/2} on one of the two lattices.

    Spatial weights are stored in natural lattice order, frequency weights
    in FFT order (the order in which multipliers are applied).
    """

    domain: str            # "spatial" | "frequency"
    exponent: float
    values: np.ndarray     # shape (*spatial,), positive
    grid: Grid


def weight_field(grid: Grid, domain: str, r: float) -> WeightField:
    """Japanese-bracket weight <x>^{-r} or <xi>^{-r} on the lattice."""
    if r < 0:
        raise ValueError(f"weight exponent must be >= 0, got {r}")
    if domain == "spatial":
        rad = grid.x_radius
    elif domain == "frequency":
        rad = grid.xi_radius_fft
    else:
        raise ConfigurationError(f"unknown weight domain {domain!r}")
    values = (1.0 + rad ** 2) ** (-r / 2.0)
    return WeightField(domain=domain, exponent=float(r), values=values,
                       grid=grid)
