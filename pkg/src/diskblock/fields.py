"""Scalar fields on the unit disk in a Chebyshev-Fourier representation.

The disk is parametrized over the doubled domain (r, theta) in
[-1, 1] x [0, 2pi): every physical point appears twice, with
u(-r, theta) = u(r, theta + pi).  Fields sampled that way and expanded as

    u(r, theta) = sum_{k,l} u_hat[k, l] T_k(r) exp(i l theta)

carry a parity constraint: u_hat[k, l] = 0 whenever k + l is odd.  Radial
nodes are Chebyshev points r_i = cos(i pi / N_r) with N_r odd, so no node
sits at r = 0; angular nodes are uniform with N_theta even, so the
theta -> theta + pi shift is exact on the grid.

Fourier indices follow the FFT layout l = 0, 1, ..., N_theta/2 - 1,
-N_theta/2, ..., -1 along axis 1 of the coefficient array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

__all__ = [
    "DiskGrid",
    "ValueField",
    "CoeffField",
    "dfs_extend",
    "analyze",
    "synthesize",
    "enforce_parity",
    "parity_residual",
    "disk_integral",
    "area_integral",
    "area_inner",
    "cheb_inner_product",
    "linf_norm",
    "l2_norm",
    "area_l2_norm",
]


class DiskGrid:
    """Tensor grid for the doubled disk, with quadrature tables.

    Parameters
    ----------
    n_r : int
        Radial polynomial degree; must be odd.  There are n_r + 1 radial
        nodes r_i = cos(i pi / n_r) running from +1 down to -1.
    n_theta : int
        Number of uniform angular nodes; must be even.

    Attributes
    ----------
    r, theta : ndarray
        Node coordinates.
    ells : ndarray of int
        Fourier wavenumbers in FFT order along the coefficient axis 1.
    area_moments : ndarray
        m_k = integral_{-1}^{1} T_k(r) |r| dr, so that the disk integral of
        a field is pi * sum_k m_k * u_hat[k, 0].
    area_node_weights : ndarray
        Per-radial-node weights w_i with integral = sum_{ij} w_i u_ij;
        algebraically identical to the moment formula.
    cheb_weights : ndarray
        Chebyshev-Gauss-Lobatto weights pi / (c_i n_r) for the weighted
        inner product diagnostic.
    """

    def __init__(self, n_r: int, n_theta: int):
        n_r, n_theta = int(n_r), int(n_theta)
        if n_r < 3 or n_r % 2 == 0:
            raise ValueError("n_r must be odd and >= 3")
        if n_theta < 4 or n_theta % 2 == 1:
            raise ValueError("n_theta must be even and >= 4")
        self.n_r = n_r
        self.n_theta = n_theta
        i = np.arange(n_r + 1)
        self.r = np.cos(i * np.pi / n_r)
        self.theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        self.h_theta = 2.0 * np.pi / n_theta
        self.ells = np.fft.fftfreq(n_theta, 1.0 / n_theta).astype(int)

        # endpoint scaling c_i = 2 at i = 0, n_r and 1 inside
        self.c_tilde = np.ones(n_r + 1)
        self.c_tilde[0] = self.c_tilde[-1] = 2.0
        self.cheb_weights = np.pi / (self.c_tilde * n_r)

        self.area_moments = self._radial_moments()
        self._check_moments()
        # w_i = (2 pi / (n_r n_theta c_i)) sum_k (m_k / c_k) T_k(r_i)
        tk = np.polynomial.chebyshev.chebvander(self.r, n_r)  # (n_r+1, n_r+1)
        self.area_node_weights = (
            2.0 * np.pi / (n_r * n_theta * self.c_tilde)
        ) * (tk @ (self.area_moments / self.c_tilde))

    def _radial_moments(self) -> np.ndarray:
        # m_k = int_{-1}^{1} T_k |r| dr: zero for odd k, twice the [0, 1]
        # integral otherwise.  Gauss-Legendre on [0, 1] is exact here.
        n = self.n_r
        q = n // 2 + 3
        x, w = np.polynomial.legendre.leggauss(q)
        rq = 0.5 * (x + 1.0)
        wq = 0.5 * w
        tk = np.polynomial.chebyshev.chebvander(rq, n)  # (q, n+1)
        m = 2.0 * (tk * (rq * wq)[:, None]).sum(axis=0)
        m[1::2] = 0.0
        return m

    def _check_moments(self):
        m = self.area_moments
        ref = {0: 1.0, 2: 0.0, 4: -1.0 / 3.0}
        for k, val in ref.items():
            if k <= self.n_r and abs(m[k] - val) > 1e-12:
                raise RuntimeError(
                    f"radial moment m_{k} = {m[k]!r} deviates from {val}"
                )

    @property
    def shape(self):
        return (self.n_r + 1, self.n_theta)

    def cartesian(self):
        """Cartesian images (X, Y) of all nodes; negative r wraps by pi."""
        return (
            self.r[:, None] * np.cos(self.theta)[None, :],
            self.r[:, None] * np.sin(self.theta)[None, :],
        )

    def __eq__(self, other):
        return (
            isinstance(other, DiskGrid)
            and other.n_r == self.n_r
            and other.n_theta == self.n_theta
        )

    def __hash__(self):
        return hash((self.n_r, self.n_theta))

    def __repr__(self):
        return f"DiskGrid(n_r={self.n_r}, n_theta={self.n_theta})"


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class ValueField:
    """Real samples on the doubled grid, shape (n_r + 1, n_theta)."""

    grid: DiskGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        if isinstance(other, ValueField):
            _check_same_grid(self, other)
            return ValueField(self.grid, self.values + other.values)
        return ValueField(self.grid, self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ValueField):
            _check_same_grid(self, other)
            return ValueField(self.grid, self.values - other.values)
        return ValueField(self.grid, self.values - other)

    def __mul__(self, c):
        if isinstance(c, ValueField):
            _check_same_grid(self, c)
            return ValueField(self.grid, self.values * c.values)
        return ValueField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return ValueField(self.grid, -self.values)


@dataclass(frozen=True)
class CoeffField:
    """Chebyshev-Fourier coefficients, complex, FFT layout on axis 1."""

    grid: DiskGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coeffs shape {c.shape} != grid shape {self.grid.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, grid: DiskGrid, value: float) -> "CoeffField":
        c = np.zeros(grid.shape, dtype=complex)
        c[0, 0] = value
        return cls(grid, c)

    def __add__(self, other):
        if isinstance(other, CoeffField):
            _check_same_grid(self, other)
            return CoeffField(self.grid, self.coeffs + other.coeffs)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, CoeffField):
            _check_same_grid(self, other)
            return CoeffField(self.grid, self.coeffs - other.coeffs)
        return NotImplemented

    def __mul__(self, c):
        return CoeffField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self):
        return CoeffField(self.grid, -self.coeffs)


def dfs_extend(grid: DiskGrid, f) -> ValueField:
    """Sample data given on the physical half r in [0, 1] onto the doubled grid.

    ``f`` is either a vectorized callable f(r, theta) or an array of values
    at the nodes with r_i > 0 (shape ((n_r + 1) // 2, n_theta), radii
    descending from 1).  Nodes with negative radius receive the value at
    (|r|, theta + pi); the result is exactly parity-clean.
    """
    n_half = (grid.n_r + 1) // 2
    if callable(f):
        rr = grid.r[:n_half][:, None]
        tt = grid.theta[None, :]
        top = np.asarray(f(rr, tt), dtype=float)
        top = np.broadcast_to(top, (n_half, grid.n_theta)).copy()
    else:
        top = np.asarray(f, dtype=float)
        if top.shape != (n_half, grid.n_theta):
            raise ValueError(
                f"expected half-grid values of shape {(n_half, grid.n_theta)}, "
                f"got {top.shape}"
            )
    values = np.empty(grid.shape)
    values[:n_half] = top
    # r_{n_r - i} = -r_i and theta_j + pi is a half-turn roll of the columns
    values[n_half:] = np.roll(top[::-1], grid.n_theta // 2, axis=1)
    return ValueField(grid, values)


def analyze(v: ValueField) -> CoeffField:
    """Forward transform: FFT in theta, Chebyshev (DCT-I) in r."""
    g = v.grid
    fhat = np.fft.fft(v.values, axis=1) / g.n_theta
    coeffs = sfft.dct(fhat, type=1, axis=0) / (g.c_tilde[:, None] * g.n_r)
    return CoeffField(g, coeffs)


def synthesize(c: CoeffField) -> ValueField:
    """Inverse transform back to grid samples (real part)."""
    g = c.grid
    b = c.coeffs * (g.c_tilde[:, None] / 2.0)
    vals = sfft.dct(b, type=1, axis=0)
    v = np.fft.ifft(vals, axis=1) * g.n_theta
    return ValueField(g, v.real)


def _parity_mask(grid: DiskGrid) -> np.ndarray:
    k = np.arange(grid.n_r + 1)[:, None]
    l = grid.ells[None, :]
    return (k + l) % 2 == 0


def enforce_parity(c: CoeffField) -> CoeffField:
    """Zero every coefficient with k + l odd."""
    return CoeffField(c.grid, np.where(_parity_mask(c.grid), c.coeffs, 0.0))


def parity_residual(c: CoeffField) -> float:
    """Largest |coefficient| in the forbidden k + l odd positions."""
    bad = np.where(_parity_mask(c.grid), 0.0, np.abs(c.coeffs))
    return float(bad.max())


def disk_integral(c: CoeffField) -> float:
    """Integral over the physical disk, area measure r dr dtheta.

    Only the l = 0 column contributes: pi * sum_k m_k * u_hat[k, 0].
    """
    return float(np.pi * (c.grid.area_moments @ c.coeffs[:, 0]).real)


def area_integral(v: ValueField) -> float:
    """Disk integral straight from samples; matches ``disk_integral``."""
    return float(v.grid.area_node_weights @ v.values.sum(axis=1))


def area_inner(f: ValueField, g: ValueField) -> float:
    """Area-measure inner product of two sampled fields."""
    _check_same_grid(f, g)
    return float(f.grid.area_node_weights @ (f.values * g.values).sum(axis=1))


def cheb_inner_product(f: ValueField, g: ValueField) -> float:
    """Chebyshev-weighted diagnostic inner product.

    h_theta * sum_ij f_ij g_ij w_i with Gauss-Lobatto weights w_i; this is
    the measure dr dtheta / sqrt(1 - r^2), not the area measure, and is
    kept for conditioning diagnostics only.
    """
    _check_same_grid(f, g)
    return float(f.grid.h_theta * (f.grid.cheb_weights @ (f.values * g.values).sum(axis=1)))


def linf_norm(f: ValueField) -> float:
    return float(np.abs(f.values).max())


def l2_norm(f: ValueField) -> float:
    """Norm of the Chebyshev-weighted inner product."""
    return float(np.sqrt(max(cheb_inner_product(f, f), 0.0)))


def area_l2_norm(f: ValueField) -> float:
    """L2 norm in the area measure (the norm used by the energy estimates)."""
    return float(np.sqrt(max(area_inner(f, f), 0.0)))
