"""Operator calculus on Chebyshev and ultraspherical coefficient spaces.

Working in coefficient space keeps every operator sparse: differentiating a
Chebyshev series m times lands in the ultraspherical family C^(m) where the
derivative is a single diagonal, and multiplication by a low-degree
polynomial stays banded.  Bases are tagged by an integer ``lam``:

* ``lam = 0``  Chebyshev T
* ``lam >= 1`` ultraspherical (Gegenbauer) C^(lam)

The identities behind the constructors:

    d^m/dx^m T_{k+m} = 2^(m-1) (m-1)! (k+m) C_k^(m)
    T_k   = (C_k^(1) - C_{k-2}^(1)) / 2
    C_k^(lam) = lam/(lam+k) C_k^(lam+1) - lam/(lam+k) C_{k-2}^(lam+1)
    T_j T_k   = (T_{j+k} + T_|j-k|) / 2

Everything is built at a fixed truncation ``n`` (coefficients 0..n-1) and
composed with ``@``, which checks that basis tags line up.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_triangular

__all__ = [
    "SpectralOperator",
    "diff_operator",
    "conversion_operator",
    "conversion_chain",
    "mult_operator_cheb",
    "mult_operator_ultra",
]


class SpectralOperator:
    """A matrix acting between tagged coefficient bases.

    Parameters
    ----------
    matrix : array or sparse matrix, shape (n, n)
        Coefficient-space representation.
    from_basis, to_basis : int
        Basis tags of the domain and range (0 = Chebyshev T,
        m >= 1 = ultraspherical C^(m)).

    The wrapped matrix is immutable by convention; compose with ``@``,
    which verifies that the inner basis tags agree.
    """

    def __init__(self, matrix, from_basis: int, to_basis: int):
        if from_basis < 0 or to_basis < 0:
            raise ValueError("basis tags must be non-negative integers")
        self.matrix = sp.csr_matrix(matrix)
        self.from_basis = int(from_basis)
        self.to_basis = int(to_basis)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """Apply to a coefficient vector (or stacked columns)."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.shape[1]:
            raise ValueError(
                f"operator expects {self.shape[1]} coefficients, got {coeffs.shape[0]}"
            )
        return self.matrix @ coeffs

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def diag_offsets(self) -> np.ndarray:
        """Sorted offsets (col - row) of the nonzero diagonals."""
        coo = self.matrix.tocoo()
        if coo.nnz == 0:
            return np.array([], dtype=int)
        return np.unique(coo.col - coo.row)

    def __matmul__(self, other: "SpectralOperator") -> "SpectralOperator":
        if not isinstance(other, SpectralOperator):
            return NotImplemented
        if other.to_basis != self.from_basis:
            raise ValueError(
                f"basis mismatch in composition: C^({other.to_basis}) into "
                f"an operator reading C^({self.from_basis})"
            )
        return SpectralOperator(
            self.matrix @ other.matrix, other.from_basis, self.to_basis
        )

    def __repr__(self):
        return (
            f"SpectralOperator(C^({self.from_basis}) -> C^({self.to_basis}), "
            f"shape {self.shape}, nnz {self.matrix.nnz})"
        )


def diff_operator(order: int, n: int) -> SpectralOperator:
    """m-th differentiation, Chebyshev T into C^(m).

    Single diagonal at offset ``order`` with entries
    2^(m-1) (m-1)! (k+m), k = 0, 1, ...
    """
    m = int(order)
    if m < 1:
        raise ValueError("differentiation order must be >= 1")
    if n < 1:
        raise ValueError("truncation must be positive")
    if m >= n:
        mat = sp.csr_matrix((n, n))
    else:
        k = np.arange(n - m)
        vals = (2.0 ** (m - 1)) * float(math.factorial(m - 1)) * (k + m)
        mat = sp.diags([vals], [m], shape=(n, n))
    return SpectralOperator(mat, 0, m)


def conversion_operator(lam: int, n: int) -> SpectralOperator:
    """One-step basis raise C^(lam) -> C^(lam+1), with lam = 0 meaning T -> C^(1).

    Upper-triangular with nonzero diagonals at offsets 0 and +2.
    """
    lam = int(lam)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if n < 1:
        raise ValueError("truncation must be positive")
    k = np.arange(n)
    if lam == 0:
        main = np.where(k == 0, 1.0, 0.5)
        upper2 = np.full(max(n - 2, 0), -0.5)
    else:
        main = np.where(k == 0, 1.0, lam / (lam + k))
        j = np.arange(max(n - 2, 0))
        upper2 = -lam / (lam + j + 2.0)
    if n > 2:
        mat = sp.diags([main, upper2], [0, 2], shape=(n, n))
    else:
        mat = sp.diags([main], [0], shape=(n, n))
    return SpectralOperator(mat, lam, lam + 1)


def conversion_chain(src: int, dst: int, n: int) -> SpectralOperator:
    """Composite conversion C^(src) -> C^(dst) for src <= dst."""
    src, dst = int(src), int(dst)
    if src < 0 or dst < src:
        raise ValueError("need 0 <= src <= dst")
    op = SpectralOperator(sp.eye(n), src, src)
    for lam in range(src, dst):
        op = conversion_operator(lam, n) @ op
    return op


def mult_operator_cheb(a_coeffs, n: int) -> SpectralOperator:
    """Multiplication by a(x) in the Chebyshev basis, T -> T.

    Half Toeplitz (with doubled a_0 on the diagonal) plus half a Hankel
    block whose first row is zero; both come from
    T_j T_k = (T_{j+k} + T_|j-k|) / 2.
    """
    a = np.asarray(a_coeffs, dtype=float).ravel()
    if a.size == 0:
        raise ValueError("empty coefficient vector")
    if n < 1:
        raise ValueError("truncation must be positive")
    pad = np.zeros(2 * n)
    pad[: min(a.size, 2 * n)] = a[: 2 * n]
    idx = np.arange(n)
    toe = pad[np.abs(idx[:, None] - idx[None, :])]
    toe[idx, idx] += a[0]
    han = pad[idx[:, None] + idx[None, :]]
    han[0, :] = 0.0
    return SpectralOperator(0.5 * (toe + han), 0, 0)


def mult_operator_ultra(a_coeffs, lam: int, n: int) -> SpectralOperator:
    """Multiplication by a(x) in an ultraspherical basis, C^(lam) -> C^(lam).

    Conjugates the Chebyshev multiplication matrix: S_{0,lam} M_T[a] S_{lam,0}.
    The down-conversion S_{lam,0} is never formed; it is applied by a
    banded upper-triangular back-substitution against S_{0,lam}.
    """
    lam = int(lam)
    if lam not in (1, 2):
        raise ValueError("lam must be 1 or 2")
    s_up = conversion_chain(0, lam, n).toarray()
    m_cheb = mult_operator_cheb(a_coeffs, n).toarray()
    # X = M_T[a] @ inv(S)  via  S^T X^T = M_T[a]^T  (S upper triangular)
    x = solve_triangular(s_up.T, m_cheb.T, lower=True).T
    return SpectralOperator(s_up @ x, lam, lam)
