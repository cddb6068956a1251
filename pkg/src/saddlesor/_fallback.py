"""Pure-Python kernels with the same signatures as ``_kernels``.

Used when the compiled extension is missing or ``SADDLESOR_PURE_PYTHON`` is set.
The banded routines delegate to LAPACK through scipy.
"""

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded


def csr_matvec(indptr, indices, data, x, out):
    nrows = indptr.shape[0] - 1
    rows = np.repeat(np.arange(nrows), np.diff(indptr))
    out[:] = np.bincount(rows, weights=data * x[indices], minlength=nrows)


def band_cholesky(ab):
    try:
        ab[:] = cholesky_banded(ab, lower=True, check_finite=False)
    except LinAlgError as exc:
        # scipy reports the 1-based order of the failing leading minor
        msg = str(exc)
        digits = "".join(ch if ch.isdigit() else " " for ch in msg).split()
        return int(digits[0]) - 1 if digits else 0
    return -1


def band_solve(lb, rhs, out):
    out[:] = cho_solve_banded((np.asarray(lb), True), np.asarray(rhs), check_finite=False)
