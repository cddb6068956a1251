"""Stationary iterations for every method family and a restarted GMRES baseline.

Both solvers stop on the relative residual

    RES = sqrt(|b1 - Ax - By|^2 + |b2 - B^T x|^2) / (same at the start vector)

with a zero start vector unless one is supplied.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, NoConvergence, ParamViolation
from .linalg import spd_factor
from .problem import QCase, a_hat
from .spectral import Family, MethodId, MethodParams, gmpsd_denominator

# iterates beyond this residual ratio are treated as diverged
DIVERGENCE_RES = 1e50


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-9
    max_iter: int = 1200
    record_history: bool = False
    x0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass
class SolveResult:
    x: np.ndarray
    y: np.ndarray
    iterations: int
    converged: bool
    final_res: float
    res_history: Optional[np.ndarray] = None
    wall_seconds: float = 0.0
    method: str = ""


def _residual_norm(system, x, y):
    r1, r2 = system.residual_blocks(x, y)
    return math.sqrt(float(r1 @ r1) + float(r2 @ r2))


def residual_res(system, x, y, x0=None, y0=None):
    """Relative residual RES of (x, y) with respect to the start (x0, y0); 0 if the start is exact."""
    if np.shape(x) != (system.m,) or np.shape(y) != (system.n,):
        raise DimensionMismatch("iterate sizes do not match the system")
    x0 = np.zeros(system.m) if x0 is None else x0
    y0 = np.zeros(system.n) if y0 is None else y0
    if np.shape(x0) != (system.m,) or np.shape(y0) != (system.n,):
        raise DimensionMismatch("start vector sizes do not match the system")
    den = _residual_norm(system, x0, y0)
    if den == 0.0:
        return 0.0
    return _residual_norm(system, x, y) / den


def _start(system, opts):
    x = np.zeros(system.m) if opts.x0 is None else np.array(opts.x0, dtype=np.float64)
    y = np.zeros(system.n) if opts.y0 is None else np.array(opts.y0, dtype=np.float64)
    if x.shape != (system.m,) or y.shape != (system.n,):
        raise DimensionMismatch("start vector sizes do not match the system")
    return x, y


def make_step(system, q_factor, params: MethodParams):
    """Return ``step(x, y) -> (x_new, y_new)`` for one outer iteration."""
    system.require_rhs()
    bad = params.violations()
    if bad:
        raise ParamViolation(bad)
    A_inv = system.a_factor.solve
    Q_inv = q_factor.solve
    B, Bt = system.B, system.Bt
    b1, b2 = system.b1, system.b2
    t1, t2, w1, w2, a = params.tau1, params.tau2, params.omega1, params.omega2, params.a

    if params.method is MethodId.SimplifiedGMPSD:
        def step(x, y):
            y1 = y + t2 * Q_inv(Bt @ x - b2)
            x1 = (1.0 - t1) * x + t1 * A_inv(b1 - B @ y1)
            return x1, y1
    elif params.family is Family.FORWARD:
        scale = 1.0 / (1.0 - a * w2)

        def step(x, y):
            x1 = (1.0 - t1) * x + t1 * A_inv(b1 - B @ y)
            y1 = y + scale * Q_inv(Bt @ (w2 * x1 + (t2 - w2) * x) - t2 * b2)
            return x1, y1
    elif params.family is Family.BACKWARD:
        scale = t2 / (1.0 - (1.0 - a) * w2)

        def step(x, y):
            y1 = y + scale * Q_inv(Bt @ x - b2)
            x1 = (1.0 - t1) * x + A_inv(t1 * (b1 - B @ y) - w1 * (B @ (y1 - y)))
            return x1, y1
    else:
        scale = 1.0 / gmpsd_denominator(a, w2)

        def step(x, y):
            inner = (t2 - t1 * w2) * x + t1 * w2 * A_inv(b1 - B @ y)
            y1 = y + scale * Q_inv(Bt @ inner - t2 * b2)
            x1 = (1.0 - t1) * x + A_inv(B @ ((w1 - t1) * y - w1 * y1) + t1 * b1)
            return x1, y1
    return step


def solve_stationary(system, q_factor, params: MethodParams, opts: SolveOptions = SolveOptions()) -> SolveResult:
    """Run the method's recurrence until RES <= tol or max_iter steps.

    Hitting max_iter, or a residual that overflows, returns ``converged=False``
    rather than raising.
    """
    step = make_step(system, q_factor, params)
    t0 = time.perf_counter()
    x, y = _start(system, opts)
    den = _residual_norm(system, x, y)
    history = [1.0 if den else 0.0] if opts.record_history else None
    if den == 0.0:
        return SolveResult(x, y, 0, True, 0.0, np.array(history) if history else None,
                           time.perf_counter() - t0, params.method.value)
    res = 1.0
    k = 0
    converged = False
    while k < opts.max_iter:
        x, y = step(x, y)
        k += 1
        res = _residual_norm(system, x, y) / den
        if history is not None:
            history.append(res)
        if res <= opts.tol:
            converged = True
            break
        if not math.isfinite(res) or res > DIVERGENCE_RES:
            break
    return SolveResult(x, y, k, converged, res, np.array(history) if history is not None else None,
                       time.perf_counter() - t0, params.method.value)


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = math.hypot(a, b)
    return a / r, b / r


def solve_gmres(system, opts: SolveOptions = SolveOptions(), restart: Optional[int] = 100,
                preconditioner=None) -> SolveResult:
    """Restarted GMRES on the full system [[A, B], [-B^T, 0]] (x; y) = (b1; -b2).

    ``preconditioner`` is None or a Q case ('tridiag'/'diag'); the latter applies
    K = blockdiag(Ahat, I) from the right. Arnoldi uses modified Gram-Schmidt
    with one reorthogonalization pass; convergence is decided on the true RES.
    Raises ``NoConvergence`` (with the partial result attached as ``.result``)
    when ``max_iter`` inner steps are exhausted.
    """
    system.require_rhs()
    m, n = system.m, system.n
    N = m + n
    t0 = time.perf_counter()
    x, y = _start(system, opts)
    u = np.concatenate((x, y))
    rhs = system.full_rhs()

    if preconditioner is None:
        def precond(v):
            return v
        label = "gmres"
    else:
        fac = spd_factor(a_hat(system, preconditioner), "sparse")

        def precond(v):
            return np.concatenate((fac.solve(v[:m]), v[m:]))
        label = f"pgmres[{QCase.parse(preconditioner).value}]"
    if restart:
        label += f"({restart})"

    r = rhs - system.full_matvec(u)
    den = float(np.linalg.norm(r))
    history = [1.0 if den else 0.0] if opts.record_history else None
    if den == 0.0:
        return SolveResult(u[:m], u[m:], 0, True, 0.0, np.array(history) if history else None,
                           time.perf_counter() - t0, label)
    kdim = min(restart or N, N)
    total = 0
    res = 1.0
    converged = False
    while total < opts.max_iter:
        beta = float(np.linalg.norm(r))
        V = np.zeros((kdim + 1, N))
        H = np.zeros((kdim + 1, kdim))
        cs, sn = np.zeros(kdim), np.zeros(kdim)
        g = np.zeros(kdim + 1)
        g[0] = beta
        V[0] = r / beta
        j = 0
        while j < kdim and total < opts.max_iter:
            w = system.full_matvec(precond(V[j]))
            for _ in range(2):  # modified Gram-Schmidt plus one reorthogonalization pass
                for i in range(j + 1):
                    h = float(V[i] @ w)
                    H[i, j] += h
                    w -= h * V[i]
            H[j + 1, j] = float(np.linalg.norm(w))
            for i in range(j):
                hi, hi1 = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * hi + sn[i] * hi1
                H[i + 1, j] = -sn[i] * hi + cs[i] * hi1
            cs[j], sn[j] = _givens(H[j, j], H[j + 1, j])
            breakdown = H[j + 1, j] <= 1e-14 * beta
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j += 1
            total += 1
            est = abs(g[j]) / den
            if history is not None:
                history.append(est)
            if est <= opts.tol or breakdown:
                break
        z = np.linalg.solve(np.triu(H[:j, :j]), g[:j]) if j else np.zeros(0)
        u = u + precond(V[:j].T @ z)
        r = rhs - system.full_matvec(u)
        res = float(np.linalg.norm(r)) / den
        if history is not None and history:
            history[-1] = res
        if res <= opts.tol:
            converged = True
            break
        if not math.isfinite(res):
            break
    result = SolveResult(u[:m], u[m:], total, converged, res, np.array(history) if history is not None else None,
                         time.perf_counter() - t0, label)
    if not converged:
        err = NoConvergence(f"{label} reached RES = {res:.3e} after {total} iterations")
        err.result = result
        raise err
    return result
