"""Shared fixtures and field generators for the test suite."""

import numpy as np
import pytest

from diskblock import CoeffField, DiskGrid, analyze, dfs_extend


@pytest.fixture(scope="session")
def grid_small():
    return DiskGrid(17, 16)


@pytest.fixture(scope="session")
def grid_medium():
    return DiskGrid(33, 32)


def polynomial_field(grid: DiskGrid, coeffs_xy) -> CoeffField:
    """Bivariate polynomial sum c_ij x^i y^j sampled onto the grid.

    Polynomials in x, y are the fields that are genuinely smooth on the
    disk; random coefficient noise is not, even when parity-clean.
    """
    coeffs_xy = np.asarray(coeffs_xy, dtype=float)

    def f(r, t):
        x = r * np.cos(t)
        y = r * np.sin(t)
        acc = np.zeros(np.broadcast(x, y).shape)
        for i in range(coeffs_xy.shape[0]):
            for j in range(coeffs_xy.shape[1]):
                if coeffs_xy[i, j] != 0.0:
                    acc = acc + coeffs_xy[i, j] * x**i * y**j
        return acc

    return analyze(dfs_extend(grid, f))


def random_polynomial(grid: DiskGrid, degree: int, seed: int):
    """Random bivariate polynomial of total degree <= degree, with its
    coefficient table (for building derivative oracles)."""
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((degree + 1, degree + 1))
    for i in range(degree + 1):
        for j in range(degree + 1):
            if i + j > degree:
                c[i, j] = 0.0
    return polynomial_field(grid, c), c


def poly_eval(c, x, y):
    acc = np.zeros(np.broadcast(x, y).shape)
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            if c[i, j] != 0.0:
                acc = acc + c[i, j] * x**i * y**j
    return acc


def poly_dx(c):
    out = np.zeros_like(c)
    out[: c.shape[0] - 1] = c[1:] * np.arange(1, c.shape[0])[:, None]
    return out


def poly_dy(c):
    out = np.zeros_like(c)
    out[:, : c.shape[1] - 1] = c[:, 1:] * np.arange(1, c.shape[1])[None, :]
    return out


def poly_laplacian(c):
    return poly_dx(poly_dx(c)) + poly_dy(poly_dy(c))
