"""Helmholtz-type solves on the disk, plus a 1D two-point boundary solver.

Multiplying the equation -lap(u) + alpha u = f by r^2 clears the polar
coordinate singularity.  Each Fourier mode l then satisfies the 1D problem

    -(r^2 u'' + r u') + l^2 u + alpha r^2 u = r^2 f_l      on r in [-1, 1]

which in coefficient space is an almost-banded matrix: operator rows in the
C^(2) basis with the last two rows replaced by Neumann boundary rows at
r = +1 and r = -1 (the doubled-domain image of the physical boundary
condition).  At alpha = 0 the l = 0 block is singular up to constants; the
last retained operator row is replaced by the zero-disk-mean quadrature row,
which closes the system and pins the mean of the solution.

Mode systems depend on l only through l^2, so only modes l = 0..n_theta/2
are factorized; negative-l columns follow by conjugate symmetry.
Factorizations are cached per alpha and shared across steps.
"""

from __future__ import annotations

import threading
import warnings

import numpy as np
from numpy.polynomial import chebyshev as ncheb

from .fields import CoeffField, DiskGrid, ValueField, analyze, disk_integral, synthesize
from .ultraspherical import (
    conversion_chain,
    conversion_operator,
    diff_operator,
    mult_operator_cheb,
    mult_operator_ultra,
)

__all__ = [
    "DiskSolver",
    "solve_bvp_1d",
    "dirichlet_rows",
    "neumann_rows",
    "SolverError",
    "RankDeficiencyWarning",
]


class SolverError(RuntimeError):
    """Raised when a linear system cannot be solved reliably."""


class RankDeficiencyWarning(UserWarning):
    """Emitted when a consistent singular system is resolved by least squares."""


def dirichlet_rows(n: int) -> np.ndarray:
    """Boundary evaluation rows [T_k(1); T_k(-1)]."""
    k = np.arange(n)
    return np.vstack([np.ones(n), (-1.0) ** k])


def neumann_rows(n: int) -> np.ndarray:
    """Boundary derivative rows [T_k'(1); T_k'(-1)] = [k^2; (-1)^(k+1) k^2]."""
    k = np.arange(n)
    return np.vstack([k.astype(float) ** 2, ((-1.0) ** (k + 1)) * k**2])


def _cheb_derivative_matrix(n: int, order: int) -> np.ndarray:
    """Dense T -> T differentiation matrix via the Chebyshev recurrence."""
    mat = np.zeros((n, n))
    eye = np.eye(n)
    for k in range(n):
        d = ncheb.chebder(eye[:, k], m=order)
        mat[: d.size, k] = d
    return mat


class DiskSolver:
    """Grid-bound operator bundle with cached mode factorizations.

    All matrices are built once per grid at truncation n = n_r + 1 and are
    immutable afterwards; the factorization cache is guarded by a lock so
    concurrent per-mode solves stay safe.
    """

    def __init__(self, grid: DiskGrid):
        self.grid = grid
        n = grid.n_r + 1
        self.n = n

        d01 = diff_operator(1, n)
        d02 = diff_operator(2, n)
        s12 = conversion_operator(1, n)
        s02 = conversion_chain(0, 2, n)
        mt_r2 = mult_operator_cheb([0.5, 0.0, 0.5], n)  # r^2 in T
        m1_r = mult_operator_ultra([0.0, 1.0], 1, n)
        m2_r2 = mult_operator_ultra([0.5, 0.0, 0.5], 2, n)

        # -(r^2 u'' + r u') in C^(2) coefficients
        self._l0 = -(m2_r2 @ d02).toarray() - (s12 @ m1_r @ d01).toarray()
        self._p_l2 = s02.toarray()
        self._p_alpha = (m2_r2 @ s02).toarray()
        self._rhs_op = (s02 @ mt_r2).toarray()
        self._bc = neumann_rows(n)
        self._mean_row = np.pi * grid.area_moments

        # r^2 u'' + r u' in plain T coefficients, for applying the Laplacian
        mt_r = mult_operator_cheb([0.0, 1.0], n).toarray()
        self._lap_t = mt_r2.toarray() @ _cheb_derivative_matrix(
            n, 2
        ) + mt_r @ _cheb_derivative_matrix(n, 1)

        self._factors: dict[float, np.ndarray] = {}
        self._lock = threading.Lock()
        self._invlap_norm: float | None = None
        self._invlap_mode = None

    # -- assembly ---------------------------------------------------------

    def assemble_mode_operator(self, l: int, alpha: float) -> np.ndarray:
        """Bordered system matrix for Fourier mode l at the given shift.

        Rows 0..n-3 are the C^(2) operator rows, the last two are the
        Neumann boundary rows.  For the singular case l = 0, alpha = 0 the
        zero-disk-mean quadrature row replaces the last retained operator
        row of even index: the quadrature row has only even-k support, so
        an odd-parity row must not be sacrificed for it.
        """
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        a = self._l0 + (float(l) ** 2) * self._p_l2 + alpha * self._p_alpha
        a[-2:] = self._bc
        if alpha == 0.0 and l == 0:
            a[-4] = self._mean_row
        return a

    def _factor_stack(self, alpha: float) -> np.ndarray:
        """Inverses of all distinct mode systems, shape (n_theta/2 + 1, n, n)."""
        key = float(alpha)
        with self._lock:
            stack = self._factors.get(key)
        if stack is not None:
            return stack
        nl = self.grid.n_theta // 2 + 1
        l2 = np.arange(nl, dtype=float) ** 2
        mats = (
            self._l0[None, :, :]
            + l2[:, None, None] * self._p_l2[None, :, :]
            + alpha * self._p_alpha[None, :, :]
        )
        mats[:, -2:, :] = self._bc[None, :, :]
        if alpha == 0.0:
            mats[0, -4, :] = self._mean_row
        stack = np.linalg.inv(mats)
        with self._lock:
            self._factors.setdefault(key, stack)
        return self._factors[key]

    # -- solves -----------------------------------------------------------

    def helmholtz_solve(self, f: CoeffField, alpha: float,
                        extra_r2: CoeffField = None) -> CoeffField:
        """Solve -lap(u) + alpha u = f with the Neumann boundary condition.

        For alpha = 0 the right-hand side must have zero disk mean (use
        ``inverse_laplacian`` for the projected solve); the returned field
        then has zero mean as well.

        ``extra_r2`` adds a further right-hand side term g, supplied as the
        coefficients of r^2 g.  The mode systems act on the equation after
        multiplication by r^2, so g enters without the quotient by r^2 ever
        being formed: r^2 lap(w) is polynomial in every mode even when w is
        too rough for lap(w) itself to be representable on the grid.
        """
        if f.grid != self.grid:
            raise ValueError("field grid does not match solver grid")
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        fh = f.coeffs
        if not np.all(np.isfinite(fh)):
            raise SolverError("non-finite right-hand side")

        n, ntheta = self.n, self.grid.n_theta
        nl = ntheta // 2 + 1
        rhs = self._rhs_op @ fh
        if extra_r2 is not None:
            if extra_r2.grid != self.grid:
                raise ValueError("field grid does not match solver grid")
            if not np.all(np.isfinite(extra_r2.coeffs)):
                raise SolverError("non-finite right-hand side")
            rhs += self._p_l2 @ extra_r2.coeffs  # _p_l2 is the plain 0 -> 2 conversion
        rhs[-2:, :] = 0.0
        if alpha == 0.0:
            rhs[-4, 0] = 0.0

        # the factor stack is indexed by |l|; FFT columns nl.. hold
        # l = -n_theta/2 + 1 .. -1, i.e. |l| = nl - 2 down to 1
        inv = self._factor_stack(alpha)
        b = np.empty((ntheta, n, 2))
        b[:, :, 0] = rhs.real.T
        b[:, :, 1] = rhs.imag.T
        x = np.empty_like(b)
        x[:nl] = np.matmul(inv, b[:nl])
        if ntheta > 2:
            x[nl:] = np.matmul(inv[1 : nl - 1], b[nl:][::-1])[::-1]
        u = (x[:, :, 0] + 1j * x[:, :, 1]).T
        return CoeffField(self.grid, np.ascontiguousarray(u))

    def inverse_laplacian(self, f: CoeffField) -> CoeffField:
        """Solve -lap(u) = f - mean(f), returning the zero-mean solution."""
        if f.grid != self.grid:
            raise ValueError("field grid does not match solver grid")
        mean = disk_integral(f) / np.pi
        fh = f.coeffs.copy()
        fh[0, 0] -= mean
        return self.helmholtz_solve(CoeffField(self.grid, fh), 0.0)

    def laplacian_r2(self, u: CoeffField) -> CoeffField:
        """Coefficients of r^2 lap(u): per mode r^2 u_l'' + r u_l' - l^2 u_l.

        Polynomial for any input, unlike lap(u) itself, whose quotient by
        r^2 blows up near the center for fields that are not smooth on the
        disk.  ``helmholtz_solve`` accepts this form directly (extra_r2).
        """
        if u.grid != self.grid:
            raise ValueError("field grid does not match solver grid")
        g = self.grid
        w = self._lap_t @ u.coeffs - u.coeffs * (g.ells.astype(float) ** 2)[None, :]
        return CoeffField(g, w)

    def laplacian_values(self, u: CoeffField) -> np.ndarray:
        """Grid samples of lap(u) = (r^2 lap u) / r^2; no node sits at r = 0."""
        wv = synthesize(self.laplacian_r2(u)).values
        return wv / (self.grid.r**2)[:, None]

    def laplacian_apply(self, u: CoeffField) -> CoeffField:
        """lap(u) as a coefficient field."""
        return analyze(ValueField(self.grid, self.laplacian_values(u)))

    def boundary_residual(self, u: CoeffField) -> float:
        """Largest |du/dr| over the physical boundary rows (both r = +-1)."""
        return float(np.abs(self._bc @ u.coeffs).max())


def solve_bvp_1d(
    a_coeffs,
    f_coeffs,
    bc: str,
    n: int,
    bc_values=(0.0, 0.0),
) -> np.ndarray:
    """Solve u'' + u' + a(x) u = f on [-1, 1] in Chebyshev coefficients.

    Parameters
    ----------
    a_coeffs, f_coeffs : array_like
        Chebyshev coefficients of the variable coefficient and right-hand
        side (padded or truncated to n).
    bc : {"dirichlet", "neumann"}
        Boundary rows appended at r = +1 and r = -1.
    n : int
        Truncation; the solution has coefficients 0..n-1.
    bc_values : pair of float
        Boundary data at +1 and -1.

    A numerically singular but consistent system (for example pure Neumann
    with a = 0, which admits constants) is resolved by least squares: the
    minimal-norm solution is returned and a ``RankDeficiencyWarning``
    reports the condition estimate and the singular direction.  An
    inconsistent singular system raises ``SolverError``.
    """
    if n < 4:
        raise ValueError("truncation too small for a bordered second-order system")
    if bc == "dirichlet":
        rows = dirichlet_rows(n)
    elif bc == "neumann":
        rows = neumann_rows(n)
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")

    def pad(c):
        c = np.asarray(c, dtype=float).ravel()
        out = np.zeros(n)
        out[: min(c.size, n)] = c[:n]
        return out

    a_hat, f_hat = pad(a_coeffs), pad(f_coeffs)
    d02 = diff_operator(2, n).toarray()
    s12d01 = (conversion_operator(1, n) @ diff_operator(1, n)).toarray()
    s02 = conversion_chain(0, 2, n).toarray()
    lmat = d02 + s12d01 + s02 @ mult_operator_cheb(a_hat, n).toarray()

    sys = np.empty((n, n))
    sys[: n - 2] = lmat[: n - 2]
    sys[n - 2 :] = rows
    rhs = np.empty(n)
    rhs[: n - 2] = (s02 @ f_hat)[: n - 2]
    rhs[n - 2 :] = bc_values

    cond = np.linalg.cond(sys)
    if cond < 1e12:
        return np.linalg.solve(sys, rhs)

    sol, _, rank, sv = np.linalg.lstsq(sys, rhs, rcond=None)
    residual = np.linalg.norm(sys @ sol - rhs)
    scale = np.linalg.norm(rhs) + np.linalg.norm(sys) * np.linalg.norm(sol)
    if residual > 1e-8 * max(scale, 1.0):
        raise SolverError(
            f"singular system (cond ~ {cond:.3e}, rank {rank}/{n}) with "
            f"inconsistent data, residual {residual:.3e}"
        )
    _, _, vt = np.linalg.svd(sys)
    warnings.warn(
        RankDeficiencyWarning(
            f"rank-deficient system (cond ~ {cond:.3e}); returning the "
            f"minimal-norm solution; singular direction leading entries "
            f"{np.round(vt[-1][:4], 6)}"
        )
    )
    return sol
