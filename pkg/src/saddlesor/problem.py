"""Stokes benchmark generator, Schur-complement approximations and exact right-hand sides.

The model problem is the upwind finite-difference discretization of the
Stokes equations on the unit square with a p x p interior grid::

    T = (nu / h^2) tridiag(-1, 2, -1),   F = (1 / h) tridiag(-1, 1, 0)
    A = blockdiag(I (x) T + T (x) I, I (x) T + T (x) I)
    B = [I (x) F; F (x) I]

with h = 1/(p+1), m = 2p^2 velocity and n = p^2 pressure unknowns.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np

from . import mmio
from .errors import DimensionMismatch
from .linalg import SparseMatrix, block_diag, extract_band, kron, spd_factor, vstack


@dataclass(frozen=True)
class StokesConfig:
    p: int
    viscosity: float = 1.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"grid parameter p must be a positive integer, got {self.p!r}")
        if not self.viscosity > 0:
            raise ValueError("viscosity must be positive")

    @property
    def h(self):
        return 1.0 / (self.p + 1)

    @property
    def m(self):
        return 2 * self.p * self.p

    @property
    def n(self):
        return self.p * self.p


class QCase(enum.Enum):
    """Which part of A is kept when approximating the Schur complement."""

    TridiagA = "tridiag"
    DiagA = "diag"

    @property
    def half_bandwidth(self):
        return 1 if self is QCase.TridiagA else 0

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower()
        aliases = {"tridiag": cls.TridiagA, "1": cls.TridiagA, "case1": cls.TridiagA,
                   "diag": cls.DiagA, "2": cls.DiagA, "case2": cls.DiagA}
        if key not in aliases:
            raise ValueError(f"unknown Q case {s!r} (expected 'tridiag' or 'diag')")
        return aliases[key]


@dataclass(frozen=True, eq=False)
class SaddlePointSystem:
    """Ax + By = b1, B^T x = b2, i.e. [[A, B], [-B^T, 0]] (x; y) = (b1; -b2)."""

    A: SparseMatrix
    B: SparseMatrix
    b1: Optional[np.ndarray] = None
    b2: Optional[np.ndarray] = None
    Bt: SparseMatrix = field(init=False, repr=False)

    def __post_init__(self):
        if self.A.rows != self.A.cols:
            raise DimensionMismatch(f"A must be square, got {self.A.shape}")
        if self.B.rows != self.A.rows:
            raise DimensionMismatch(f"B has {self.B.rows} rows, A has {self.A.rows}")
        if self.b1 is not None and np.shape(self.b1) != (self.m,):
            raise DimensionMismatch("b1 length must equal m")
        if self.b2 is not None and np.shape(self.b2) != (self.n,):
            raise DimensionMismatch("b2 length must equal n")
        object.__setattr__(self, "Bt", self.B.transpose())

    @property
    def m(self):
        return self.A.rows

    @property
    def n(self):
        return self.B.cols

    @cached_property
    def a_factor(self):
        """Cached banded Cholesky factor of A (raises NotSpd)."""
        return spd_factor(self.A, "sparse")

    def with_rhs(self, b1, b2):
        return SaddlePointSystem(self.A, self.B, np.asarray(b1, float), np.asarray(b2, float))

    def require_rhs(self):
        if self.b1 is None or self.b2 is None:
            raise ValueError("right-hand sides are not set")

    def residual_blocks(self, x, y):
        """Return (b1 - Ax - By, b2 - B^T x)."""
        self.require_rhs()
        return self.b1 - self.A @ x - self.B @ y, self.b2 - self.Bt @ x

    def full_matvec(self, u):
        """Apply [[A, B], [-B^T, 0]] to u = (x, y)."""
        x, y = u[: self.m], u[self.m:]
        return np.concatenate((self.A @ x + self.B @ y, -(self.Bt @ x)))

    def full_rhs(self):
        self.require_rhs()
        return np.concatenate((self.b1, -self.b2))

    def to_dense(self):
        A, B = self.A.to_dense(), self.B.to_dense()
        return np.block([[A, B], [-B.T, np.zeros((self.n, self.n))]])

    def save(self, directory, Q=None):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        mmio.write_matrix(d / "A.mtx", self.A)
        mmio.write_matrix(d / "B.mtx", self.B)
        if Q is not None:
            mmio.write_matrix(d / "Q.mtx", Q)
        if self.b1 is not None:
            mmio.write_vector(d / "b1.txt", self.b1)
        if self.b2 is not None:
            mmio.write_vector(d / "b2.txt", self.b2)

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        A = mmio.read_matrix(d / "A.mtx")
        B = mmio.read_matrix(d / "B.mtx")
        if not isinstance(A, SparseMatrix):
            A = SparseMatrix.from_dense(A)
        if not isinstance(B, SparseMatrix):
            B = SparseMatrix.from_dense(B)
        b1 = mmio.read_vector(d / "b1.txt") if (d / "b1.txt").exists() else None
        b2 = mmio.read_vector(d / "b2.txt") if (d / "b2.txt").exists() else None
        return cls(A, B, b1, b2)


def stokes_blocks(p, viscosity=1.0):
    """The one-dimensional operators T and F."""
    h = 1.0 / (p + 1)
    T = SparseMatrix.tridiag(p, -1.0, 2.0, -1.0).scale(viscosity / h**2)
    F = SparseMatrix.tridiag(p, -1.0, 1.0, 0.0).scale(1.0 / h)
    return T, F


def build_stokes(cfg: StokesConfig) -> SaddlePointSystem:
    T, F = stokes_blocks(cfg.p, cfg.viscosity)
    I = SparseMatrix.identity(cfg.p)
    lap = kron(I, T) + kron(T, I)
    A = block_diag(lap, lap)
    B = vstack(kron(I, F), kron(F, I))
    return SaddlePointSystem(A, B)


def build_q(system: SaddlePointSystem, case):
    """Q = B^T Ahat^{-1} B with Ahat the diagonal or tridiagonal part of A.

    Returns the dense Q together with its Cholesky factorization; NotSpd
    here means B is rank deficient or Ahat is indefinite.
    """
    case = QCase.parse(case)
    a_hat = extract_band(system.A, case.half_bandwidth)
    fac = spd_factor(a_hat, "sparse")
    Z = fac.solve_many(system.B.to_dense())
    Q = system.B.to_scipy().T @ Z
    Q = 0.5 * (Q + Q.T)
    return Q, spd_factor(Q, "dense")


def a_hat(system: SaddlePointSystem, case):
    return extract_band(system.A, QCase.parse(case).half_bandwidth)


def rhs_exact_ones(system: SaddlePointSystem):
    """Right-hand sides for which x = 1_m, y = 1_n is the exact solution."""
    ones_m, ones_n = np.ones(system.m), np.ones(system.n)
    b1 = system.A @ ones_m + system.B @ ones_n
    b2 = system.Bt @ ones_m
    return b1, b2


def stokes_problem(p, case=None, viscosity=1.0):
    """Convenience: system with exact-ones rhs, plus (Q, Q factor) when a case is given."""
    sysm = build_stokes(StokesConfig(p, viscosity))
    sysm = sysm.with_rhs(*rhs_exact_ones(sysm))
    if case is None:
        return sysm
    Q, qf = build_q(sysm, case)
    return sysm, Q, qf
