"""Grid layout, transforms, parity, and quadrature against exact integrals."""

import numpy as np
import pytest

from diskblock import (
    CoeffField,
    DiskGrid,
    ValueField,
    analyze,
    area_integral,
    dfs_extend,
    disk_integral,
    enforce_parity,
    parity_residual,
    synthesize,
)
from diskblock.fields import area_inner, area_l2_norm, cheb_inner_product

from conftest import polynomial_field


class TestGrid:
    def test_layout(self, grid_small):
        g = grid_small
        assert g.shape == (18, 16)
        assert g.r[0] == 1.0 and g.r[-1] == -1.0
        assert np.all(np.diff(g.r) < 0)
        # odd n_r puts no node at the center
        assert np.abs(g.r).min() > 1e-3
        assert np.allclose(np.diff(g.theta), 2 * np.pi / 16)

    @pytest.mark.parametrize("n_r,n_theta", [(4, 16), (2, 16), (17, 15), (17, 2)])
    def test_rejects_bad_sizes(self, n_r, n_theta):
        with pytest.raises(ValueError):
            DiskGrid(n_r, n_theta)

    def test_moments(self, grid_small):
        # m_k = int T_k(r) |r| dr on [-1, 1]: 1, 0, 0, 0, -1/3, 0, ...
        m = grid_small.area_moments
        assert abs(m[0] - 1.0) < 1e-14
        assert np.abs(m[1::2]).max() < 1e-14
        assert abs(m[4] + 1.0 / 3.0) < 1e-14
        # generic k = 2j: 2 * (-1)^(j+1) / ((2j)^2 - 4) ... checked numerically
        rq = np.linspace(0, 1, 20001)
        t6 = np.cos(6 * np.arccos(rq))
        ref = 2.0 * np.trapezoid(t6 * rq, rq)
        assert abs(m[6] - ref) < 1e-7

    def test_node_weights_match_moments(self, grid_small):
        g = grid_small
        rng = np.random.default_rng(0)
        vals = dfs_extend(g, rng.uniform(size=(9, 16)))
        assert abs(area_integral(vals) - disk_integral(analyze(vals))) < 1e-12

    def test_equality_and_hash(self):
        assert DiskGrid(17, 16) == DiskGrid(17, 16)
        assert DiskGrid(17, 16) != DiskGrid(19, 16)
        assert hash(DiskGrid(17, 16)) == hash(DiskGrid(17, 16))

    def test_cartesian_wraps_negative_r(self, grid_small):
        x, y = grid_small.cartesian()
        g = grid_small
        i, j = g.n_r, 0  # r = -1, theta = 0 maps to (-1, 0)
        assert abs(x[i, j] + 1.0) < 1e-14 and abs(y[i, j]) < 1e-14


class TestDFSExtension:
    def test_callable_matches_array(self, grid_small):
        g = grid_small
        n_half = (g.n_r + 1) // 2

        def f(r, t):
            return np.cos(t) * r + r**2

        top = f(g.r[:n_half][:, None], g.theta[None, :])
        a = dfs_extend(g, f)
        b = dfs_extend(g, np.broadcast_to(top, (n_half, g.n_theta)))
        assert np.array_equal(a.values, b.values)

    def test_doubling_identity(self, grid_small):
        g = grid_small
        v = dfs_extend(g, np.random.default_rng(1).uniform(size=(9, 16)))
        # value at (-r, theta) equals value at (r, theta + pi), exactly
        half = g.n_theta // 2
        assert np.array_equal(v.values[::-1], np.roll(v.values, half, axis=1))

    def test_shape_check(self, grid_small):
        with pytest.raises(ValueError, match="half-grid"):
            dfs_extend(grid_small, np.zeros((4, 16)))

    def test_extension_is_parity_clean(self, grid_small):
        v = dfs_extend(grid_small, np.random.default_rng(2).uniform(size=(9, 16)))
        assert parity_residual(analyze(v)) < 1e-14


class TestTransforms:
    def test_round_trip_values(self, grid_small):
        v = dfs_extend(grid_small, np.random.default_rng(3).uniform(size=(9, 16)))
        back = synthesize(analyze(v))
        assert np.abs(back.values - v.values).max() < 1e-12

    def test_round_trip_coeffs(self, grid_small):
        g = grid_small
        rng = np.random.default_rng(4)
        c = enforce_parity(analyze(dfs_extend(g, rng.uniform(size=(9, 16)))))
        back = analyze(synthesize(c))
        assert np.abs(back.coeffs - c.coeffs).max() < 1e-12

    def test_known_mode(self, grid_small):
        g = grid_small
        c = analyze(dfs_extend(g, lambda r, t: r * np.cos(t)))
        # r cos(theta): T_1 in r, e^{+-i theta} with weight 1/2
        want = np.zeros(g.shape, dtype=complex)
        want[1, 1] = want[1, -1] = 0.5
        assert np.abs(c.coeffs - want).max() < 1e-14

    def test_constant_field(self, grid_small):
        c = CoeffField.constant(grid_small, 2.5)
        assert np.abs(synthesize(c).values - 2.5).max() < 1e-13


class TestParity:
    def test_enforce_and_residual(self, grid_small):
        g = grid_small
        bad = np.ones(g.shape, dtype=complex)
        c = CoeffField(g, bad)
        assert parity_residual(c) == 1.0
        clean = enforce_parity(c)
        assert parity_residual(clean) == 0.0
        # retained entries survive untouched
        assert clean.coeffs[0, 0] == 1.0 and clean.coeffs[1, 1] == 1.0
        assert clean.coeffs[0, 1] == 0.0


class TestQuadrature:
    # exact disk integrals: 1 -> pi, x^2 -> pi/4, r^4 -> pi/3, x^2 y^2 -> pi/24
    CASES = [
        (np.array([[1.0]]), np.pi),
        (np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]), np.pi / 4),
        (np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), np.pi / 2),
        (np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]), np.pi / 24),
    ]

    @pytest.mark.parametrize("cxy,want", CASES)
    def test_polynomial_integrals(self, grid_small, cxy, want):
        u = polynomial_field(grid_small, cxy)
        assert abs(disk_integral(u) - want) < 1e-13
        assert abs(area_integral(synthesize(u)) - want) < 1e-13

    def test_area_inner_oracle(self, grid_small):
        # <x, x> over the disk = pi/4
        u = polynomial_field(grid_small, np.array([[0.0], [1.0]]))
        v = synthesize(u)
        assert abs(area_inner(v, v) - np.pi / 4) < 1e-13
        assert abs(area_l2_norm(v) - np.sqrt(np.pi) / 2) < 1e-13

    def test_cheb_inner_oracle(self, grid_small):
        # weight 1/sqrt(1-r^2): int dr dtheta = 2 pi^2 for the constant 1
        one = synthesize(CoeffField.constant(grid_small, 1.0))
        assert abs(cheb_inner_product(one, one) - 2 * np.pi**2) < 1e-10

    def test_grid_mismatch(self, grid_small, grid_medium):
        a = synthesize(CoeffField.constant(grid_small, 1.0))
        b = synthesize(CoeffField.constant(grid_medium, 1.0))
        with pytest.raises(ValueError, match="different grids"):
            area_inner(a, b)


class TestFieldArithmetic:
    def test_coeff_ops(self, grid_small):
        g = grid_small
        a = CoeffField.constant(g, 1.0)
        b = CoeffField.constant(g, 2.0)
        assert (a + b).coeffs[0, 0] == 3.0
        assert (a - b).coeffs[0, 0] == -1.0
        assert (a * 4.0).coeffs[0, 0] == 4.0
        assert (-a).coeffs[0, 0] == -1.0

    def test_value_ops(self, grid_small):
        g = grid_small
        a = synthesize(CoeffField.constant(g, 1.0))
        assert np.allclose((a + a).values, 2.0)
        assert np.allclose((a - a).values, 0.0)
        assert np.allclose((a * 3.0).values, 3.0)
        assert np.allclose((-a).values, -1.0)

    def test_mixed_grid_raises(self, grid_small, grid_medium):
        a = CoeffField.constant(grid_small, 1.0)
        b = CoeffField.constant(grid_medium, 1.0)
        with pytest.raises(ValueError):
            a + b

    def test_shape_validation(self, grid_small):
        with pytest.raises(ValueError):
            ValueField(grid_small, np.zeros((3, 3)))
        with pytest.raises(ValueError):
            CoeffField(grid_small, np.zeros((3, 3), dtype=complex))
