"""Linear-algebra substrate: CSR matrices, Kronecker products, band
extraction, SPD factorizations and a capped dense symmetric eigensolver.

Dense matrices and vectors are plain ``numpy.ndarray`` objects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .backend import get_kernels
from .errors import Asymmetric, DimensionMismatch, NotSpd, NotSquare, OracleCapExceeded

SYM_RTOL = 1e-10
ORACLE_CAP = 5000


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Compressed-row matrix with sorted, duplicate-free column indices."""

    rows: int
    cols: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if indptr.shape != (self.rows + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("malformed row offsets")
        if len(indices) != len(data):
            raise ValueError("indices and values differ in length")
        if len(indices):
            if indices.min() < 0 or indices.max() >= self.cols:
                raise ValueError("column index out of bounds")
            # strictly increasing within each row
            steps = np.diff(indices)
            row_starts = indptr[1:-1]
            inner = np.ones(len(steps), dtype=bool)
            inner[row_starts[(row_starts > 0) & (row_starts < len(indices))] - 1] = False
            if np.any(steps[inner] <= 0):
                raise ValueError("column indices must be strictly increasing within rows")
        object.__setattr__(self, "indptr", _readonly(indptr))
        object.__setattr__(self, "indices", _readonly(indices))
        object.__setattr__(self, "data", _readonly(data))

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self):
        return len(self.data)

    @classmethod
    def from_coo(cls, rows, cols, r, c, v):
        """Build from triplets; duplicates are summed and entries sorted."""
        r = np.asarray(r, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        v = np.asarray(v, dtype=np.float64)
        if len(r):
            key = r * cols + c
            order = np.argsort(key, kind="stable")
            key, v = key[order], v[order]
            uniq, start = np.unique(key, return_index=True)
            v = np.add.reduceat(v, start)
            r, c = uniq // cols, uniq % cols
        counts = np.bincount(r, minlength=rows)
        indptr = np.concatenate(([0], np.cumsum(counts)))
        return cls(rows, cols, indptr, c, v)

    @classmethod
    def from_dense(cls, a, drop_zeros=True):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-D array")
        mask = a != 0 if drop_zeros else np.ones(a.shape, dtype=bool)
        r, c = np.nonzero(mask)
        return cls.from_coo(a.shape[0], a.shape[1], r, c, a[r, c])

    @classmethod
    def from_scipy(cls, m):
        m = m.tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def identity(cls, n, scale=1.0):
        idx = np.arange(n)
        return cls(n, n, np.arange(n + 1), idx, np.full(n, float(scale)))

    @classmethod
    def tridiag(cls, n, sub, diag, sup):
        """Constant-coefficient tridiagonal matrix; zero coefficients are not stored."""
        r, c, v = [], [], []
        for off, val in ((-1, sub), (0, diag), (1, sup)):
            if val == 0:
                continue
            i = np.arange(max(0, -off), min(n, n - off))
            r.append(i)
            c.append(i + off)
            v.append(np.full(len(i), float(val)))
        if not r:
            return cls.from_coo(n, n, [], [], [])
        return cls.from_coo(n, n, np.concatenate(r), np.concatenate(c), np.concatenate(v))

    def row_ids(self):
        return np.repeat(np.arange(self.rows), np.diff(self.indptr))

    def to_dense(self):
        out = np.zeros(self.shape)
        out[self.row_ids(), self.indices] = self.data
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=self.shape)

    def transpose(self):
        return SparseMatrix.from_coo(self.cols, self.rows, self.indices, self.row_ids(), self.data)

    @property
    def T(self):
        return self.transpose()

    def scale(self, alpha):
        return SparseMatrix(self.rows, self.cols, self.indptr, self.indices, alpha * self.data)

    def __add__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        if other.shape != self.shape:
            raise DimensionMismatch(f"{self.shape} + {other.shape}")
        return SparseMatrix.from_coo(
            self.rows, self.cols,
            np.concatenate((self.row_ids(), other.row_ids())),
            np.concatenate((self.indices, other.indices)),
            np.concatenate((self.data, other.data)),
        )

    def __matmul__(self, v):
        v = np.asarray(v)
        if v.ndim == 1:
            return spmv(self, v)
        if v.ndim == 2:
            return np.column_stack([spmv(self, v[:, j]) for j in range(v.shape[1])]) \
                if v.shape[1] else np.zeros((self.rows, 0))
        return NotImplemented

    def half_bandwidth(self):
        if self.nnz == 0:
            return 0
        return int(np.max(np.abs(self.row_ids() - self.indices)))

    def is_symmetric(self, rtol=SYM_RTOL):
        if self.rows != self.cols:
            return False
        scale = np.max(np.abs(self.data)) if self.nnz else 0.0
        diff = (self + self.transpose().scale(-1.0)).data
        return not diff.size or np.max(np.abs(diff)) <= rtol * scale


def block_diag(*blocks):
    r, c, v = [], [], []
    ro = co = 0
    for b in blocks:
        r.append(b.row_ids() + ro)
        c.append(b.indices + co)
        v.append(b.data)
        ro += b.rows
        co += b.cols
    return SparseMatrix.from_coo(ro, co, np.concatenate(r), np.concatenate(c), np.concatenate(v))


def vstack(*blocks):
    cols = blocks[0].cols
    if any(b.cols != cols for b in blocks):
        raise DimensionMismatch("vstack needs equal column counts")
    r, c, v = [], [], []
    ro = 0
    for b in blocks:
        r.append(b.row_ids() + ro)
        c.append(b.indices)
        v.append(b.data)
        ro += b.rows
    return SparseMatrix.from_coo(ro, cols, np.concatenate(r), np.concatenate(c), np.concatenate(v))


def kron(a, b):
    """Kronecker product; entry (i*b.rows+k, j*b.cols+l) = a[i,j]*b[k,l]."""
    ar, ac = a.row_ids(), a.indices
    br, bc = b.row_ids(), b.indices
    r = (ar[:, None] * b.rows + br[None, :]).ravel()
    c = (ac[:, None] * b.cols + bc[None, :]).ravel()
    v = (a.data[:, None] * b.data[None, :]).ravel()
    return SparseMatrix.from_coo(a.rows * b.rows, a.cols * b.cols, r, c, v)


def spmv(m, v, out=None, backend=None):
    """Sparse matrix-vector product m @ v."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.shape != (m.cols,):
        raise DimensionMismatch(f"matrix has {m.cols} columns, vector has shape {v.shape}")
    if out is None:
        out = np.empty(m.rows)
    get_kernels(backend).csr_matvec(m.indptr, m.indices, m.data, v, out)
    return out


def extract_band(m, half_bandwidth):
    """Keep entries with |i - j| <= half_bandwidth (0: diagonal, 1: tridiagonal)."""
    if m.rows != m.cols:
        raise NotSquare(f"band extraction needs a square matrix, got {m.shape}")
    r = m.row_ids()
    keep = np.abs(r - m.indices) <= half_bandwidth
    return SparseMatrix.from_coo(m.rows, m.cols, r[keep], m.indices[keep], m.data[keep])


def check_symmetric(a, rtol=SYM_RTOL):
    if isinstance(a, SparseMatrix):
        ok = a.is_symmetric(rtol)
    else:
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NotSquare(f"expected a square matrix, got shape {a.shape}")
        scale = np.max(np.abs(a)) if a.size else 0.0
        ok = np.max(np.abs(a - a.T), initial=0.0) <= rtol * scale
    if not ok:
        raise Asymmetric("matrix is not symmetric within the relative tolerance")


class SpdFactorization:
    """Cholesky factor of an SPD matrix; ``solve`` is reentrant."""

    dim: int

    def solve(self, rhs):
        raise NotImplementedError

    def solve_many(self, rhs):
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.ndim == 1:
            return self.solve(rhs)
        return np.column_stack([self.solve(rhs[:, j]) for j in range(rhs.shape[1])])

    def __call__(self, rhs):
        return self.solve(rhs)


class BandedCholesky(SpdFactorization):
    """Lower banded Cholesky, O(n*bw^2) factor and O(n*bw) solve."""

    def __init__(self, m, backend=None):
        self.dim = m.rows
        self.bandwidth = bw = m.half_bandwidth()
        self._kernels = get_kernels(backend)
        ab = np.zeros((bw + 1, self.dim))
        r, c = m.row_ids(), m.indices
        low = r >= c
        ab[r[low] - c[low], c[low]] = m.data[low]
        failed = self._kernels.band_cholesky(ab)
        if failed >= 0:
            raise NotSpd(f"nonpositive pivot at row {failed}", pivot=failed)
        self.factor = _readonly(ab)

    def solve(self, rhs):
        rhs = np.ascontiguousarray(rhs, dtype=np.float64)
        if rhs.shape != (self.dim,):
            raise DimensionMismatch(f"expected rhs of length {self.dim}, got {rhs.shape}")
        out = np.empty(self.dim)
        self._kernels.band_solve(self.factor, rhs, out)
        return out


class DenseCholesky(SpdFactorization):
    def __init__(self, m):
        m = np.asarray(m, dtype=np.float64)
        self.dim = m.shape[0]
        try:
            c, lower = sla.cho_factor(m, lower=True, check_finite=False)
        except sla.LinAlgError as exc:
            raise NotSpd(str(exc)) from exc
        self._cf = (c, lower)
        self.lower = _readonly(np.tril(c))

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=np.float64)
        if rhs.shape[0] != self.dim:
            raise DimensionMismatch(f"expected rhs of length {self.dim}, got {rhs.shape}")
        return sla.cho_solve(self._cf, rhs, check_finite=False)

    solve_many = solve


def spd_factor(m, layout=None, backend=None):
    """Factor a symmetric positive definite matrix.

    ``layout`` is 'sparse' (banded Cholesky on a SparseMatrix) or 'dense'
    (LAPACK Cholesky); by default it follows the type of ``m``.
    """
    if layout is None:
        layout = "sparse" if isinstance(m, SparseMatrix) else "dense"
    if layout == "sparse":
        if not isinstance(m, SparseMatrix):
            m = SparseMatrix.from_dense(m)
        if m.rows != m.cols:
            raise NotSquare(f"expected a square matrix, got {m.shape}")
        check_symmetric(m)
        return BandedCholesky(m, backend=backend)
    if layout == "dense":
        if isinstance(m, SparseMatrix):
            m = m.to_dense()
        check_symmetric(m)
        return DenseCholesky(m)
    raise ValueError(f"unknown layout {layout!r}")


def dense_sym_eig(m, cap=ORACLE_CAP):
    """Eigenvalues of a symmetric dense matrix in ascending order."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] > cap:
        raise OracleCapExceeded(f"dimension {m.shape[0]} exceeds oracle cap {cap}")
    check_symmetric(m)
    return np.linalg.eigvalsh(0.5 * (m + m.T))
