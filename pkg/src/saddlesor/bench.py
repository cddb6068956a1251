"""Benchmark orchestration: generate, bound, optimize, verify, solve, report.

A configuration is plain text of ``key=value`` tokens separated by spaces or
newlines (``#`` starts a comment)::

    p=8,16,24 q=tridiag,diag methods=gsor,gmesor,simplified_gmpsd
    a=0 tol=1e-9 max_iter=1200 oracle=on workers=4

Rows are independent jobs; the report is always sorted by
(p, case, method, a) so reruns are identical apart from wall time.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, SaddleError
from .linalg import ORACLE_CAP
from .params import optimal
from .problem import QCase, stokes_problem
from .solvers import SolveOptions, solve_gmres, solve_stationary
from .spectral import (FIELDS, MethodId, MethodParams, _TIES, iteration_matrix_dense, j_bounds, j_spectrum,
                       predicted_rho, schur_complement, spectral_radius_dense)

BASELINES = ("gmres", "pgmres")


@dataclass(frozen=True)
class BenchConfig:
    p_list: tuple = (8,)
    q_cases: tuple = (QCase.TridiagA,)
    methods: tuple = (MethodId.GSOR,)
    a_list: tuple = (0.0,)  # None means "derive a" (GESOR)
    tol: float = 1e-9
    max_iter: int = 1200
    output: Optional[str] = None
    oracle: bool = False
    oracle_cap: int = ORACLE_CAP
    omega2: float = 0.0  # free omega2 for GMEBSOR and GMPSD
    workers: int = 1
    restart: int = 100
    mode: str = "solve"  # or "sweep"
    grid: tuple = ()  # sweep axes: ((field, values), ...)

    def __post_init__(self):
        if not self.p_list:
            raise ConfigError("p list must be nonempty")
        if any(int(p) != p or p < 1 for p in self.p_list):
            raise ConfigError("p values must be positive integers")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.mode not in ("solve", "sweep"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def combinations(self):
        return [(p, c, m, a) for p in self.p_list for c in self.q_cases for m in self.methods
                for a in self.a_list]


COLUMNS = ("p", "case", "method", "a", "mu_min", "mu_max", "tau1", "tau2", "omega1", "omega2",
           "rho_formula", "rho_oracle", "iterations", "converged", "final_res", "max_error",
           "wall_seconds", "error")
_INT_COLS = {"p", "iterations"}
_STR_COLS = {"case", "method", "error", "converged"}


@dataclass
class BenchRow:
    p: int
    case: str
    method: str
    a: float = math.nan
    mu_min: float = math.nan
    mu_max: float = math.nan
    tau1: float = math.nan
    tau2: float = math.nan
    omega1: float = math.nan
    omega2: float = math.nan
    rho_formula: float = math.nan
    rho_oracle: float = math.nan
    iterations: Optional[int] = None
    converged: str = ""
    final_res: float = math.nan
    max_error: float = math.nan
    wall_seconds: float = math.nan
    error: str = ""

    def values(self):
        return [getattr(self, c) for c in COLUMNS]


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    @property
    def errored(self):
        return [r for r in self.rows if r.error]

    @property
    def ok(self):
        return not self.errored


# -- config parsing ---------------------------------------------------------


def _split_list(v):
    return [s for s in v.replace(";", ",").split(",") if s.strip()]


def _parse_value(key, raw, lineno):
    def fail(why):
        raise ConfigError(f"line {lineno}: bad value for '{key}': {raw!r} ({why})")

    try:
        if key == "p":
            vals = []
            for tok in _split_list(raw):
                if ":" in tok:  # lo:hi:step
                    lo, hi, *step = (int(t) for t in tok.split(":"))
                    vals.extend(range(lo, hi + 1, step[0] if step else 1))
                else:
                    vals.append(int(tok))
            if not vals or any(v < 1 for v in vals):
                fail("expected positive integers")
            return tuple(vals)
        if key == "q":
            return tuple(QCase.parse(t) for t in _split_list(raw))
        if key == "methods":
            out = []
            for t in _split_list(raw):
                out.append(t.lower() if t.lower() in BASELINES else MethodId.parse(t))
            return tuple(out)
        if key == "a":
            return tuple(None if t.lower() in ("auto", "opt") else float(t) for t in _split_list(raw))
        if key in ("tol", "omega2"):
            return float(raw)
        if key in ("max_iter", "workers", "restart", "oracle_cap"):
            v = int(raw)
            return v
        if key == "oracle":
            low = raw.lower()
            if low in ("on", "true", "1", "yes"):
                return True
            if low in ("off", "false", "0", "no"):
                return False
            fail("expected on/off")
        if key in ("output", "mode"):
            return raw
        if key.startswith("grid."):
            lo, hi, count = raw.split(":")
            return tuple(np.linspace(float(lo), float(hi), int(count)))
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        fail(str(exc))
    raise ConfigError(f"line {lineno}: unknown key '{key}'")


_ALIASES = {"q_cases": "q", "case": "q", "cases": "q", "q_case": "q", "method": "methods",
            "a_list": "a", "p_list": "p", "out": "output", "max-iter": "max_iter", "maxiter": "max_iter"}
_TARGET = {"p": "p_list", "q": "q_cases", "methods": "methods", "a": "a_list"}


_SEP = re.compile(r"\s*[=,:]\s*")


def parse_config(text: str) -> BenchConfig:
    """Parse ``key=value`` tokens; unknown keys and bad values name the line and key."""
    kw = {}
    grid = []
    seen = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        line = _SEP.sub(lambda m: m.group(0).strip(), line)  # allow "p = 8, 16"
        for tok in line.split():
            if "=" not in tok:
                raise ConfigError(f"line {lineno}: expected key=value, got {tok!r}")
            key, raw = tok.split("=", 1)
            key = _ALIASES.get(key.strip().lower(), key.strip().lower())
            if key in seen:
                raise ConfigError(f"line {lineno}: key '{key}' already set on line {seen[key]}")
            seen[key] = lineno
            val = _parse_value(key, raw.strip(), lineno)
            if key.startswith("grid."):
                name = key[5:]
                if name not in FIELDS:
                    raise ConfigError(f"line {lineno}: unknown grid parameter '{name}'")
                grid.append((name, val))
            else:
                kw[_TARGET.get(key, key)] = val
    if grid:
        kw["grid"] = tuple(grid)
    try:
        return BenchConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# -- execution --------------------------------------------------------------


@dataclass
class _Instance:
    system: object
    Q: np.ndarray
    q_factor: object
    mu: Optional[np.ndarray]
    bounds: object


def _instance(p, case, cfg):
    system, Q, qf = stokes_problem(p, case)
    if system.n <= cfg.oracle_cap:
        mu, bounds = j_spectrum(schur_complement(system), Q, cap=cfg.oracle_cap)
    else:
        mu, bounds = None, j_bounds(system, qf)
    return _Instance(system, Q, qf, mu, bounds)


def _sort_key(row):
    case_order = {c.value: i for i, c in enumerate(QCase)}
    meth_order = {m.value: i for i, m in enumerate(MethodId)}
    meth_order.update({b: len(meth_order) + i for i, b in enumerate(BASELINES)})
    a = row.a if not math.isnan(row.a) else -math.inf
    return (row.p, case_order.get(row.case, 99), meth_order.get(row.method, 99), a)


def _override(params, values):
    """Replace raw fields, keeping tied groups consistent and recomputing derived ones."""
    ties = _TIES[params.method]
    d = params.as_dict()
    for name, v in values.items():
        d[name] = v
        for group in ties.groups:
            if name in group:
                for g in group:
                    d[g] = v
    for name, _ in ties.derived:
        if name not in values:
            d.pop(name, None)
            for group in ties.groups:
                if name in group:
                    for g in group:
                        if g not in values:
                            d.pop(g, None)
    return MethodParams.make(params.method, **d)


def _solve_row(inst, p, case, method, a, cfg):
    row = BenchRow(p, case.value, method if isinstance(method, str) else method.value,
                   a=math.nan if a is None else float(a))
    t0 = time.perf_counter()
    try:
        b = inst.bounds
        row.mu_min, row.mu_max = b.mu_min, b.mu_max
        opts = SolveOptions(tol=cfg.tol, max_iter=cfg.max_iter)
        if isinstance(method, str):
            res = solve_gmres(inst.system, opts, restart=cfg.restart,
                              preconditioner=case if method == "pgmres" else None)
        else:
            opt = optimal(method, b, a=a, omega2=cfg.omega2)
            prm = opt.params
            row.a = prm.a
            row.tau1, row.tau2, row.omega1, row.omega2 = prm.tau1, prm.tau2, prm.omega1, prm.omega2
            row.rho_formula = opt.rho_opt
            if cfg.oracle and inst.system.m + inst.system.n <= cfg.oracle_cap:
                row.rho_oracle = spectral_radius_dense(iteration_matrix_dense(inst.system, inst.Q, prm))
            res = solve_stationary(inst.system, inst.q_factor, prm, opts)
        row.iterations = res.iterations
        row.converged = "yes" if res.converged else "no"
        row.final_res = res.final_res
        row.max_error = float(max(np.max(np.abs(res.x - 1.0)), np.max(np.abs(res.y - 1.0))))
    except (SaddleError, ValueError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        partial = getattr(exc, "result", None)
        if partial is not None:
            row.iterations = partial.iterations
            row.converged = "no"
            row.final_res = partial.final_res
    row.wall_seconds = time.perf_counter() - t0
    return row


def _sweep_rows(inst, p, case, method, a, cfg):
    base = BenchRow(p, case.value, method if isinstance(method, str) else method.value,
                    a=math.nan if a is None else float(a))
    if isinstance(method, str):
        base.error = "ConfigError: sweeps apply to stationary methods only"
        return [base]
    try:
        opt = optimal(method, inst.bounds, a=a, omega2=cfg.omega2)
    except (SaddleError, ValueError) as exc:
        base.error = f"{type(exc).__name__}: {exc}"
        return [base]
    spectrum = inst.mu if inst.mu is not None else inst.bounds.as_array()
    names = [g[0] for g in cfg.grid]
    rows = []
    for combo in itertools.product(*(g[1] for g in cfg.grid)):
        row = replace(base, mu_min=inst.bounds.mu_min, mu_max=inst.bounds.mu_max)
        t0 = time.perf_counter()
        try:
            prm = _override(opt.params, dict(zip(names, combo)))
            row.a = prm.a
            row.tau1, row.tau2, row.omega1, row.omega2 = prm.tau1, prm.tau2, prm.omega1, prm.omega2
            bad = prm.violations()
            if bad:
                row.error = "ParamViolation: " + "; ".join(bad)
            else:
                row.rho_formula = predicted_rho(prm, spectrum, inst.system.m > inst.system.n)
        except (SaddleError, ValueError) as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        row.wall_seconds = time.perf_counter() - t0
        rows.append(row)
    return rows


def run_bench(cfg: BenchConfig) -> BenchReport:
    """Run every (p, case, method, a) combination; failures become row errors."""
    pairs = sorted({(p, c) for p, c, _, _ in cfg.combinations()}, key=lambda t: (t[0], list(QCase).index(t[1])))
    lock = threading.Lock()
    instances = {}

    def build(pair):
        try:
            inst = _instance(pair[0], pair[1], cfg)
        except SaddleError as exc:
            inst = exc
        with lock:
            instances[pair] = inst

    def job(combo):
        p, case, method, a = combo
        inst = instances[(p, case)]
        if isinstance(inst, Exception):
            row = BenchRow(p, case.value, method if isinstance(method, str) else method.value,
                           a=math.nan if a is None else float(a), error=f"{type(inst).__name__}: {inst}")
            return [row]
        if cfg.mode == "sweep":
            return _sweep_rows(inst, p, case, method, a, cfg)
        return [_solve_row(inst, p, case, method, a, cfg)]

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        list(pool.map(build, pairs))
        results = list(pool.map(job, cfg.combinations()))
    rows = [r for group in results for r in group]
    rows.sort(key=_sort_key)  # stable, so sweep points keep grid order
    return BenchReport(rows)


# -- reporting --------------------------------------------------------------


def _fmt(col, v):
    if v is None:
        return ""
    if col in _INT_COLS or col in _STR_COLS:
        return str(v)
    v = float(v)
    return "" if math.isnan(v) else "%.6g" % v


def emit_report(report: BenchReport, fmt: str = "csv") -> str:
    """Render with a fixed column order and reals to 6 significant digits."""
    table = [[_fmt(c, v) for c, v in zip(COLUMNS, row.values())] for row in report.rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(table)
        return buf.getvalue()
    if fmt in ("markdown", "md"):
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        for r in table:
            lines.append("| " + " | ".join(c.replace("|", "\\|") for c in r) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def read_report_csv(text: str) -> BenchReport:
    """Inverse of ``emit_report(..., 'csv')`` up to the printed precision."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COLUMNS:
        raise ConfigError("unexpected report columns")
    rows = []
    for rec in reader:
        kw = {}
        for f in fields(BenchRow):
            raw = rec[f.name]
            if f.name in _STR_COLS:
                kw[f.name] = raw
            elif f.name in _INT_COLS:
                kw[f.name] = int(raw) if raw else None
            else:
                kw[f.name] = float(raw) if raw else math.nan
        rows.append(BenchRow(**kw))
    return BenchReport(rows)
