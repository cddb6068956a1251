"""Matrix Market and plain-text vector I/O."""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg import SparseMatrix


def write_matrix(path, m, comment=""):
    """Write a SparseMatrix as coordinate .mtx or an ndarray as array .mtx."""
    if isinstance(m, SparseMatrix):
        scipy.io.mmwrite(str(path), m.to_scipy().tocoo(), comment=comment, field="real", precision=17)
    else:
        scipy.io.mmwrite(str(path), np.asarray(m, dtype=np.float64), comment=comment, field="real",
                         precision=17)


def read_matrix(path):
    """Coordinate files come back as SparseMatrix, array files as ndarray."""
    data = scipy.io.mmread(str(path))
    if sp.issparse(data):
        return SparseMatrix.from_scipy(data)
    return np.asarray(data, dtype=np.float64)


def write_vector(path, v):
    np.savetxt(str(path), np.asarray(v, dtype=np.float64), fmt="%.17g")


def read_vector(path):
    return np.atleast_1d(np.loadtxt(str(path), dtype=np.float64, ndmin=1))
