"""Spectrum of J = Q^{-1} B^T A^{-1} B, method parameters, and the dense
iteration-matrix oracle.

Every stationary method here is a preconditioned iteration
``u_{k+1} = H u_k + R^{-1} T b`` with ``H = I - R^{-1} T K`` for the
saddle-point matrix ``K = [[A, B], [-B^T, 0]]``. With the splitting
``K = D - L - U``::

    D = diag(A, Q),  L = [[0, 0], [B^T, aQ]],  U = [[0, -B], [0, (1-a)Q]]
    T = diag(tau1 I, tau2 I),  W = diag(omega1 I, omega2 I)

the forward family uses R = D - W L, the backward family R = D - W U and
the GMPSD family R = (D - W L) D^{-1} (D - W U). Each eigenvalue mu of J
yields two eigenvalues of H as roots of a quadratic; the remaining m - n
eigenvalues all equal 1 - tau1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import (DimensionMismatch, NoConvergence, NotSquare, OracleCapExceeded, ParamViolation,
                     SingularPreconditioner)
from .linalg import ORACLE_CAP, DenseCholesky, dense_sym_eig

# relative tolerance used when checking parameter ties and nonsingularity
TIE_RTOL = 1e-12
SINGULAR_TOL = 1e-12


class QSign(enum.Enum):
    PositiveDefinite = "pos"
    NegativeDefinite = "neg"

    @property
    def sign(self):
        return 1.0 if self is QSign.PositiveDefinite else -1.0

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        key = str(s).strip().lower()
        if key in ("pos", "positive", "spd", "+", "positivedefinite"):
            return cls.PositiveDefinite
        if key in ("neg", "negative", "-", "negativedefinite"):
            return cls.NegativeDefinite
        raise ValueError(f"unknown definiteness {s!r} (expected 'pos' or 'neg')")


@dataclass(frozen=True)
class SpectralBounds:
    mu_min: float
    mu_max: float
    q_sign: QSign = QSign.PositiveDefinite

    def __post_init__(self):
        object.__setattr__(self, "q_sign", QSign.parse(self.q_sign))
        lo, hi = float(self.mu_min), float(self.mu_max)
        object.__setattr__(self, "mu_min", lo)
        object.__setattr__(self, "mu_max", hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("spectral bounds must be finite")
        if lo > hi:
            raise ValueError(f"mu_min={lo} exceeds mu_max={hi}")
        if self.q_sign is QSign.PositiveDefinite and not lo > 0:
            raise ValueError("positive definite Q requires 0 < mu_min")
        if self.q_sign is QSign.NegativeDefinite and not hi < 0:
            raise ValueError("negative definite Q requires mu_max < 0")

    @property
    def geometric_mean(self):
        """sqrt(mu_min * mu_max), always positive."""
        return math.sqrt(self.mu_min * self.mu_max)

    def as_array(self):
        return np.array([self.mu_min, self.mu_max])


class Family(enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    GMPSD = "gmpsd"


class MethodId(enum.Enum):
    GSOR = "gsor"
    GBSOR = "gbsor"
    SORLike = "sorlike"
    GESOR = "gesor"
    GMESOR = "gmesor"
    GEBSOR = "gebsor"
    GMEBSOR = "gmebsor"
    GMPSD = "gmpsd"
    GMPSD3 = "gmpsd3"
    GMSSOR = "gmssor"
    GPSD = "gpsd"
    GSSOR = "gssor"
    SimplifiedGMPSD = "simplified_gmpsd"
    Uzawa = "uzawa"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        key = "".join(ch for ch in str(s).lower() if ch.isalnum())
        for m in cls:
            if key in (m.value.replace("_", ""), m.name.lower()):
                return m
        extra = {"sor": cls.SORLike, "sorlike": cls.SORLike, "simplified": cls.SimplifiedGMPSD,
                 "sgmpsd": cls.SimplifiedGMPSD}
        if key in extra:
            return extra[key]
        raise ValueError(f"unknown method {s!r}; known: {', '.join(m.value for m in cls)}")

    @property
    def family(self) -> Family:
        return _FAMILY[self]


_FAMILY = {
    MethodId.GSOR: Family.FORWARD, MethodId.SORLike: Family.FORWARD, MethodId.GESOR: Family.FORWARD,
    MethodId.GMESOR: Family.FORWARD, MethodId.Uzawa: Family.FORWARD,
    MethodId.GBSOR: Family.BACKWARD, MethodId.GEBSOR: Family.BACKWARD,
    MethodId.GMEBSOR: Family.BACKWARD,
    MethodId.GMPSD: Family.GMPSD, MethodId.GMPSD3: Family.GMPSD, MethodId.GMSSOR: Family.GMPSD,
    MethodId.GPSD: Family.GMPSD, MethodId.GSSOR: Family.GMPSD, MethodId.SimplifiedGMPSD: Family.GMPSD,
}

FIELDS = ("tau1", "tau2", "omega1", "omega2", "a")


@dataclass(frozen=True)
class _Ties:
    groups: tuple = ()  # names that must be equal
    fixed: tuple = ()  # (name, value)
    derived: tuple = ()  # (name, callable(dict) -> value)
    defaults: tuple = ()  # unused fields: (name, callable(dict)), never validated


def _gmssor_tau(d):
    return d["omega1"] + d["omega2"] - d["omega1"] * d["omega2"]


def _gssor_tau(d):
    return d["omega1"] * (2.0 - d["omega1"])


_TIES = {
    MethodId.GSOR: _Ties(groups=(("tau1", "omega1"), ("tau2", "omega2"))),
    MethodId.GBSOR: _Ties(groups=(("tau1", "omega1"), ("tau2", "omega2"))),
    MethodId.SORLike: _Ties(groups=(("tau1", "tau2", "omega1", "omega2"),)),
    MethodId.GESOR: _Ties(groups=(("tau1", "tau2"),), defaults=(("omega1", lambda d: d["tau1"]),)),
    MethodId.GMESOR: _Ties(defaults=(("omega1", lambda d: d["tau1"]),)),
    MethodId.Uzawa: _Ties(fixed=(("tau1", 1.0), ("tau2", 1.0), ("omega1", 1.0), ("omega2", 1.0),
                                 ("a", 0.0))),
    MethodId.GEBSOR: _Ties(groups=(("tau1", "tau2"),)),
    MethodId.GMEBSOR: _Ties(),
    MethodId.GMPSD: _Ties(),
    MethodId.GMPSD3: _Ties(groups=(("tau1", "tau2"),)),
    MethodId.GMSSOR: _Ties(groups=(("tau1", "tau2"),), derived=(("tau1", _gmssor_tau),)),
    MethodId.GPSD: _Ties(groups=(("tau1", "tau2"), ("omega1", "omega2"))),
    MethodId.GSSOR: _Ties(groups=(("omega1", "omega2"), ("tau1", "tau2")),
                          derived=(("tau1", _gssor_tau),)),
    MethodId.SimplifiedGMPSD: _Ties(fixed=(("omega2", 0.0),), derived=(("omega1", lambda d: d["tau1"]),)),
}


def _close(x, y, rtol=TIE_RTOL):
    return abs(x - y) <= rtol * max(1.0, abs(x), abs(y))


@dataclass(frozen=True)
class MethodParams:
    """The five scalars of the general method plus the variant they belong to."""

    tau1: float
    tau2: float
    omega1: float
    omega2: float
    a: float = 0.0
    method: MethodId = MethodId.GMESOR

    def __post_init__(self):
        object.__setattr__(self, "method", MethodId.parse(self.method))
        for name in FIELDS:
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def make(cls, method, tau1=None, tau2=None, omega1=None, omega2=None, a=None):
        """Fill tied parameters from the free ones.

        Any member of a tie group may carry the value, e.g. GSOR accepts
        either ``tau1`` or ``omega1``. Missing free parameters raise.
        """
        method = MethodId.parse(method)
        ties = _TIES[method]
        d = {k: v for k, v in dict(tau1=tau1, tau2=tau2, omega1=omega1, omega2=omega2, a=a).items()
             if v is not None}
        for name, value in ties.fixed:
            d.setdefault(name, value)
        d.setdefault("a", 0.0)
        # derived values may feed a group, and groups may feed derived values
        for _ in range(3):
            for name, fn in ties.derived:
                if name not in d:
                    try:
                        d[name] = fn(d)
                    except KeyError:
                        pass
            for group in ties.groups:
                vals = [d[g] for g in group if g in d]
                if vals:
                    for g in group:
                        d.setdefault(g, vals[0])
        for name, fn in ties.defaults:
            if name not in d:
                try:
                    d[name] = fn(d)
                except KeyError:
                    pass
        missing = [f for f in FIELDS if f not in d]
        if missing:
            raise ValueError(f"{method.value}: missing parameter(s) {', '.join(missing)}")
        return cls(method=method, **{f: d[f] for f in FIELDS})

    @property
    def family(self):
        return self.method.family

    def as_dict(self):
        return {f: getattr(self, f) for f in FIELDS}

    def with_method(self, method):
        return replace(self, method=MethodId.parse(method))

    def nonsingular_factors(self):
        """The scalars that must be nonzero for the preconditioner to be invertible."""
        a, w2 = self.a, self.omega2
        fam = self.family
        if fam is Family.FORWARD:
            return {"1 - a*omega2": 1.0 - a * w2}
        if fam is Family.BACKWARD:
            return {"1 - (1-a)*omega2": 1.0 - (1.0 - a) * w2}
        return {"(1 - a*omega2)(1 - (1-a)*omega2)": (1.0 - a * w2) * (1.0 - (1.0 - a) * w2)}

    def violations(self):
        out = []
        for name in FIELDS:
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name} is not finite")
        if out:
            return out
        if self.tau1 == 0:
            out.append("tau1 must be nonzero")
        if self.tau2 == 0:
            out.append("tau2 must be nonzero")
        for label, val in self.nonsingular_factors().items():
            if abs(val) <= SINGULAR_TOL:
                out.append(f"singular preconditioner: {label} = 0")
        ties = _TIES[self.method]
        d = self.as_dict()
        for name, value in ties.fixed:
            if not _close(d[name], value):
                out.append(f"{self.method.value} requires {name} = {value:g} (got {d[name]:g})")
        for group in ties.groups:
            for g in group[1:]:
                if not _close(d[group[0]], d[g]):
                    out.append(f"{self.method.value} requires {group[0]} = {g} "
                               f"(got {d[group[0]]:g} and {d[g]:g})")
        for name, fn in ties.derived:
            want = fn(d)
            if not _close(d[name], want):
                out.append(f"{self.method.value} requires {name} = {want:g} (got {d[name]:g})")
        return out

    def check(self):
        v = self.violations()
        if v:
            raise ParamViolation(v)
        return self


def gmpsd_denominator(a, omega2):
    return (1.0 - a * omega2) * (1.0 - (1.0 - a) * omega2)


def _coefficients(params: MethodParams, mu):
    """(b, c, err_b, err_c): coefficients plus a first-order bound on their rounding error.

    The bound tracks the cancellation in the preconditioner denominators,
    which dominates when a * omega2 is close to 1.
    """
    mu = np.asarray(mu, dtype=np.float64)
    t1, t2, w1, w2, a = params.tau1, params.tau2, params.omega1, params.omega2, params.a
    fam = params.family
    if fam is Family.FORWARD:
        d = 1.0 - a * w2
        if abs(d) <= SINGULAR_TOL:
            raise SingularPreconditioner("1 - a*omega2 = 0")
        kappa = (1.0 + abs(a * w2)) / abs(d)
        pb, pc = t1 * w2, t1 * (t2 - w2)
        pc_abs = abs(t1) * (abs(t2) + abs(w2))
    elif fam is Family.BACKWARD:
        d = 1.0 - (1.0 - a) * w2
        if abs(d) <= SINGULAR_TOL:
            raise SingularPreconditioner("1 - (1-a)*omega2 = 0")
        kappa = (1.0 + abs((1.0 - a) * w2)) / abs(d)
        pb, pc = t2 * w1, t2 * (t1 - w1)
        pc_abs = abs(t2) * (abs(t1) + abs(w1))
    else:
        d1, d2 = 1.0 - a * w2, 1.0 - (1.0 - a) * w2
        d = d1 * d2
        if abs(d) <= SINGULAR_TOL:
            raise SingularPreconditioner("(1 - a*omega2)(1 - (1-a)*omega2) = 0")
        kappa = (1.0 + abs(a * w2)) / abs(d1) + (1.0 + abs((1.0 - a) * w2)) / abs(d2)
        pb = t1 * w2 + t2 * w1 - t1 * w1 * w2
        pc = t1 * t2 - t1 * w2 - t2 * w1 + t1 * w1 * w2
        pc_abs = abs(t1 * t2) + abs(t1 * w2) + abs(t2 * w1) + abs(t1 * w1 * w2)
    pb_abs = abs(t1 * w2) + abs(t2 * w1) + abs(t1 * w1 * w2) if fam is Family.GMPSD else abs(pb)
    b = t1 - 2.0 + pb * mu / d
    c = 1.0 - t1 + pc * mu / d
    eps = np.finfo(np.float64).eps
    scale = np.abs(mu) / abs(d) * (kappa + 4.0)
    err_b = eps * (abs(t1) + 2.0 + pb_abs * scale)
    err_c = eps * (1.0 + abs(t1) + pc_abs * scale)
    return b, c, err_b, err_c


def quadratic_coefficients(params: MethodParams, mu):
    """(b, c) with lambda^2 + b lambda + c = 0 for each eigenvalue mu of J."""
    b, c, _, _ = _coefficients(params, mu)
    return b, c


class LambdaRoots(NamedTuple):
    roots: np.ndarray  # shape (..., 2), complex
    fixed: float  # 1 - tau1, an eigenvalue whenever m > n


def _quadratic_roots(b, c):
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    disc = b * b - 4.0 * c
    out = np.empty(b.shape + (2,), dtype=np.complex128)
    real = disc >= 0
    # cancellation-free real roots
    sq = np.sqrt(np.where(real, disc, 0.0))
    qv = -0.5 * (b + np.copysign(sq, b))
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(qv != 0, c / qv, 0.0)
    out[..., 0] = np.where(real, qv, -0.5 * b + 0.5j * np.sqrt(np.where(real, 0.0, -disc)))
    out[..., 1] = np.where(real, r2, -0.5 * b - 0.5j * np.sqrt(np.where(real, 0.0, -disc)))
    return out


def predicted_lambda(params: MethodParams, mu) -> LambdaRoots:
    b, c = quadratic_coefficients(params, mu)
    return LambdaRoots(_quadratic_roots(b, c), 1.0 - params.tau1)


def root_moduli(params: MethodParams, mu):
    """max |lambda| per mu; uses |lambda| = sqrt(c) when the roots are complex.

    A discriminant within its own rounding-error bound of zero is treated as
    zero, so double roots (as at every optimum) do not pick up sqrt(eps) noise.
    """
    b, c, err_b, err_c = _coefficients(params, mu)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    disc = b * b - 4.0 * c
    noise = 8.0 * (2.0 * np.abs(b) * err_b + 4.0 * err_c + np.finfo(np.float64).eps * (b * b + 4.0 * np.abs(c)))
    disc = np.where(np.abs(disc) <= noise, 0.0, disc)
    real = disc >= 0
    sq = np.sqrt(np.where(real, disc, 0.0))
    big = 0.5 * (np.abs(b) + sq)
    return np.where(real, big, np.sqrt(np.abs(c)))


def predicted_rho(params: MethodParams, spectrum, m_gt_n=True):
    """Spectral radius implied by the functional relationship over all given mu."""
    mu = np.atleast_1d(np.asarray(spectrum, dtype=np.float64))
    if mu.size == 0:
        raise ValueError("spectrum is empty")
    if not (np.all(mu > 0) or np.all(mu < 0)):
        raise ValueError("spectrum must be of one sign")
    rho = float(np.max(root_moduli(params, mu)))
    if m_gt_n:
        rho = max(rho, abs(1.0 - params.tau1))
    return rho


def schur_complement(system):
    """Dense S = B^T A^{-1} B via n solves with the cached factor of A."""
    Z = system.a_factor.solve_many(system.B.to_dense())
    S = system.B.to_scipy().T @ Z
    return 0.5 * (S + S.T)


def _lower_factor(q_or_factor, q_sign):
    """Lower Cholesky factor of sign*Q."""
    if isinstance(q_or_factor, DenseCholesky):
        return q_or_factor.lower
    Q = np.asarray(q_or_factor, dtype=np.float64)
    return DenseCholesky(QSign.parse(q_sign).sign * Q).lower


def j_spectrum(S, Q, q_sign=QSign.PositiveDefinite, cap=ORACLE_CAP):
    """Generalized eigenvalues of S v = mu Q v, ascending, with their bounds."""
    q_sign = QSign.parse(q_sign)
    S = np.asarray(S, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if S.shape != Q.shape:
        raise DimensionMismatch(f"S is {S.shape}, Q is {Q.shape}")
    if S.shape[0] > cap:
        raise OracleCapExceeded(f"dimension {S.shape[0]} exceeds oracle cap {cap}; use j_bounds")
    L = _lower_factor(Q, q_sign)
    C = sla.solve_triangular(L, S, lower=True)
    C = sla.solve_triangular(L, C.T, lower=True)
    mu = q_sign.sign * dense_sym_eig(0.5 * (C + C.T), cap=cap)
    mu = np.sort(mu)
    return mu, SpectralBounds(mu[0], mu[-1], q_sign)


def j_bounds(system, q_factor, q_sign=QSign.PositiveDefinite, tol=1e-8, max_iter=None, seed=0):
    """Extreme eigenvalues of J by Lanczos with full reorthogonalization.

    Works on the symmetric operator L^{-1} B^T A^{-1} B L^{-T}, where
    L L^T = sign*Q is the Cholesky factor held by ``q_factor``.
    """
    q_sign = QSign.parse(q_sign)
    L = _lower_factor(q_factor, q_sign)
    n = system.n
    Bs, Bts = system.B, system.Bt
    fa = system.a_factor

    def op(v):
        w = sla.solve_triangular(L, v, lower=True, trans="T")
        w = Bts @ fa.solve(Bs @ w)
        return sla.solve_triangular(L, w, lower=True)

    kmax = n if max_iter is None else min(n, int(max_iter))
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    V = np.zeros((kmax + 1, n))
    V[0] = v / np.linalg.norm(v)
    alpha, beta = [], []
    lo = hi = None
    for k in range(kmax):
        w = op(V[k])
        alpha.append(float(V[k] @ w))
        w -= alpha[-1] * V[k]
        if k:
            w -= beta[-1] * V[k - 1]
        # two passes of full reorthogonalization
        for _ in range(2):
            w -= V[: k + 1].T @ (V[: k + 1] @ w)
        b = float(np.linalg.norm(w))
        theta, s = sla.eigh_tridiagonal(np.array(alpha), np.array(beta), eigvals_only=False)
        lo, hi = theta[0], theta[-1]
        scale = max(abs(lo), abs(hi))
        res_lo, res_hi = abs(b * s[-1, 0]), abs(b * s[-1, -1])
        exhausted = b <= 1e-14 * scale or k + 1 == n
        if exhausted or (res_lo <= tol * abs(lo) and res_hi <= tol * abs(hi) and k >= 2):
            sign = q_sign.sign
            mus = sorted((sign * lo, sign * hi))
            return SpectralBounds(mus[0], mus[1], q_sign)
        beta.append(b)
        V[k + 1] = w / b
    raise NoConvergence(f"Lanczos did not converge in {kmax} steps (bounds ~ {lo}, {hi})")


def _dense_blocks(system, Q):
    A = system.A.to_dense()
    B = system.B.to_dense()
    Q = np.asarray(Q, dtype=np.float64)
    m, n = system.m, system.n
    if Q.shape != (n, n):
        raise DimensionMismatch(f"Q must be {n}x{n}, got {Q.shape}")
    return A, B, Q, m, n


def splitting(system, Q, a):
    """Dense (D, L, U) with K = D - L - U."""
    A, B, Q, m, n = _dense_blocks(system, Q)
    Z = np.zeros
    D = np.block([[A, Z((m, n))], [Z((n, m)), Q]])
    L = np.block([[Z((m, m)), Z((m, n))], [B.T, a * Q]])
    U = np.block([[Z((m, m)), -B], [Z((n, m)), (1.0 - a) * Q]])
    return D, L, U


def _preconditioner_solve(system, Q, params, rhs):
    """R^{-1} rhs for the family's preconditioner R (dense)."""
    m, n = system.m, system.n
    D, L, U = splitting(system, Q, params.a)
    W = np.concatenate((np.full(m, params.omega1), np.full(n, params.omega2)))
    fam = params.family
    try:
        if fam is Family.FORWARD:
            return np.linalg.solve(D - W[:, None] * L, rhs)
        if fam is Family.BACKWARD:
            return np.linalg.solve(D - W[:, None] * U, rhs)
        z = np.linalg.solve(D - W[:, None] * L, rhs)
        return np.linalg.solve(D - W[:, None] * U, D @ z)
    except np.linalg.LinAlgError as exc:
        raise SingularPreconditioner(str(exc)) from exc


def iteration_affine(system, Q, params: MethodParams, cap=ORACLE_CAP):
    """Dense (H, c) such that one stationary step is u -> H u + c."""
    bad = params.violations()
    if any(v.startswith("singular") for v in bad):
        raise SingularPreconditioner("; ".join(bad))
    if bad:
        raise ParamViolation(bad)
    m, n = system.m, system.n
    if m + n > cap:
        raise OracleCapExceeded(f"dimension {m + n} exceeds oracle cap {cap}")
    K = system.to_dense()
    tvec = np.concatenate((np.full(m, params.tau1), np.full(n, params.tau2)))
    rhs = np.concatenate((tvec[:, None] * K, (tvec * system.full_rhs())[:, None]
                          if system.b1 is not None and system.b2 is not None
                          else np.zeros((m + n, 1))), axis=1)
    sol = _preconditioner_solve(system, Q, params, rhs)
    H = np.eye(m + n) - sol[:, :-1]
    return H, sol[:, -1]


def iteration_matrix_dense(system, Q, params: MethodParams, cap=ORACLE_CAP):
    return iteration_affine(system, Q, params, cap)[0]


def dense_eigenvalues(H, cap=ORACLE_CAP):
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotSquare(f"expected a square matrix, got shape {H.shape}")
    if H.shape[0] > cap:
        raise OracleCapExceeded(f"dimension {H.shape[0]} exceeds oracle cap {cap}")
    try:
        return sla.eigvals(H, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise NoConvergence(f"eigensolver failed: {exc}") from exc


def spectral_radius_dense(H, cap=ORACLE_CAP):
    ev = dense_eigenvalues(H, cap)
    return float(np.max(np.abs(ev))) if ev.size else 0.0


def predicted_eigenvalues(params: MethodParams, spectrum, m, n):
    """Full predicted multiset: two roots per mu plus 1 - tau1 repeated m - n times."""
    roots = predicted_lambda(params, spectrum).roots.ravel()
    return np.concatenate((roots, np.full(m - n, 1.0 - params.tau1, dtype=np.complex128)))


def multiset_distance(x, y):
    """Largest pairing error under the optimal one-to-one matching of two point sets."""
    x = np.asarray(x, dtype=np.complex128).ravel()
    y = np.asarray(y, dtype=np.complex128).ravel()
    if x.shape != y.shape:
        raise DimensionMismatch(f"multisets differ in size: {x.size} vs {y.size}")
    if x.size == 0:
        return 0.0
    cost = np.abs(x[:, None] - y[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())
