"""Complex sparse storage and sparse direct solves for the subdomain systems.

Numeric factorization is delegated to SuperLU (scipy.sparse.linalg.splu)
with threshold partial pivoting (threshold 0.1) and SuperLU's native
fill-reducing column ordering (COLAMD).  The wrapper exposes the
permutations and triangular factors so the reconstruction identity
Pr*A*Pc = L*U can be checked directly.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(RuntimeError):
    """Numeric factorization hit a zero pivot beyond pivoting rescue."""


class SparseMatrix:
    """Square complex CSR matrix with sorted, duplicate-free column indices."""

    def __init__(self, csr):
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix must be square, got shape {csr.shape}")
        csr = csr.tocsr().astype(complex)
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr

    @classmethod
    def from_coo(cls, n, rows, cols, values):
        """Assemble from triplets; duplicate entries are summed."""
        coo = sp.coo_matrix(
            (np.asarray(values, dtype=complex), (rows, cols)), shape=(n, n)
        )
        return cls(coo.tocsr())

    @classmethod
    def from_dense(cls, a):
        return cls(sp.csr_matrix(np.asarray(a, dtype=complex)))

    @property
    def n(self):
        return self._csr.shape[0]

    @property
    def indptr(self):
        return self._csr.indptr

    @property
    def indices(self):
        return self._csr.indices

    @property
    def data(self):
        return self._csr.data

    @property
    def nnz(self):
        return self._csr.nnz

    def matvec(self, x):
        return self._csr @ x

    def to_scipy(self):
        return self._csr

    def to_dense(self):
        return self._csr.toarray()

    def max_asymmetry(self):
        """max |A - A^T| over entries, relative to max |A| (complex symmetry check)."""
        d = self._csr - self._csr.T
        denom = max(1e-300, np.abs(self._csr.data).max() if self._csr.nnz else 0.0)
        return (np.abs(d.data).max() if d.nnz else 0.0) / denom


class Factorization:
    """LU factorization with row/column permutations: Pr*A*Pc = L*U."""

    def __init__(self, matrix, permc_spec="COLAMD"):
        self.n = matrix.n
        try:
            self._lu = spla.splu(
                matrix.to_scipy().tocsc(),
                permc_spec=permc_spec,
                diag_pivot_thresh=0.1,
            )
        except RuntimeError as exc:
            raise SingularMatrixError(str(exc)) from exc

    @property
    def perm_r(self):
        return self._lu.perm_r

    @property
    def perm_c(self):
        return self._lu.perm_c

    @property
    def L(self):
        return self._lu.L

    @property
    def U(self):
        return self._lu.U

    @property
    def factor_nnz(self):
        return self._lu.L.nnz + self._lu.U.nnz

    def solve(self, b):
        b = np.asarray(b, dtype=complex)
        if b.shape[0] != self.n:
            raise ValueError(f"right-hand side has length {b.shape[0]}, expected {self.n}")
        return self._lu.solve(b)

    def reconstruction_error(self, matrix):
        """max |Pr*A*Pc - L*U| relative to max |A| (should be ~machine precision)."""
        a = matrix.to_scipy().tocsc()
        n = self.n
        pr = sp.csc_matrix((np.ones(n), (self.perm_r, np.arange(n))), shape=(n, n))
        pc = sp.csc_matrix((np.ones(n), (np.arange(n), self.perm_c)), shape=(n, n))
        residual = (pr @ a @ pc) - (self.L @ self.U)
        denom = max(1e-300, np.abs(a.data).max() if a.nnz else 0.0)
        return (np.abs(residual.data).max() if residual.nnz else 0.0) / denom


def factorize(matrix, permc_spec="COLAMD"):
    """Sparse LU factorization of a SparseMatrix; deterministic given A."""
    return Factorization(matrix, permc_spec=permc_spec)


def solve(factorization, b):
    """Solve A x = b against a previous factorization."""
    return factorization.solve(b)


def dump_matrix_market(matrix, path, comment=""):
    """Write the matrix in Matrix Market coordinate format (complex general)."""
    scipy.io.mmwrite(str(path), matrix.to_scipy().tocoo(), comment=comment)
