"""Stationary SOR-type solvers with closed-form optimal parameters for
augmented (saddle-point) systems ``[[A, B], [-B^T, 0]] (x; y) = (b1; -b2)``.
"""

from .backend import BACKEND
from .bench import BenchConfig, BenchReport, emit_report, parse_config, run_bench
from .errors import (Asymmetric, ConfigError, DegenerateA, DegenerateOmega2, DimensionMismatch, Infeasible,
                     NoConvergence, NotSpd, NotSquare, OracleCapExceeded, ParamViolation, RegionNotCoded,
                     SaddleError, SingularPreconditioner)
from .linalg import SparseMatrix, spd_factor
from .params import RegionVerdict, Verdict, convergence_check, optimal, validate_params
from .problem import QCase, SaddlePointSystem, StokesConfig, build_q, build_stokes, stokes_problem
from .solvers import SolveOptions, SolveResult, residual_res, solve_gmres, solve_stationary
from .spectral import (MethodId, MethodParams, QSign, SpectralBounds, iteration_matrix_dense, j_bounds,
                       j_spectrum, predicted_rho, schur_complement)

__version__ = "0.1.0"
