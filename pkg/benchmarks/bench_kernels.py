"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--p 16 32 48] [--repeat 5]

Each kernel runs on the velocity block A of the Stokes problem; results
from both backends are compared before timing.
"""

import argparse
import timeit

import numpy as np

from saddlesor.backend import get_kernels
from saddlesor.linalg import BandedCholesky, spmv
from saddlesor.problem import stokes_problem


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench(p, repeat, backends):
    A = stokes_problem(p).A
    x = np.random.default_rng(0).standard_normal(A.rows)
    rows = []
    ref = None
    for name in backends:
        y = spmv(A, x, backend=name)
        fac = BandedCholesky(A, backend=name)
        z = fac.solve(x)
        if ref is None:
            ref = (y, z)
        else:
            assert np.allclose(y, ref[0], rtol=1e-12) and np.allclose(z, ref[1], rtol=1e-10)
        rows.append((name, "csr_matvec", _best(lambda: spmv(A, x, backend=name), repeat, 50)))
        rows.append((name, "band_cholesky", _best(lambda: BandedCholesky(A, backend=name), repeat, 1)))
        rows.append((name, "band_solve", _best(lambda: fac.solve(x), repeat, 10)))
    return A.rows, rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, nargs="+", default=[16, 32, 48])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"]
    try:
        get_kernels("cython")
        backends.insert(0, "cython")
    except ImportError:
        print("compiled kernels unavailable; timing the fallback only")
    print(f"{'p':>4} {'m':>6} {'kernel':<14}" + "".join(f"{b:>14}" for b in backends)
          + ("    speedup" if len(backends) == 2 else ""))
    for p in args.p:
        m, rows = bench(p, args.repeat, backends)
        for kernel in ("csr_matvec", "band_cholesky", "band_solve"):
            t = {b: s for b, k, s in rows if k == kernel}
            line = f"{p:>4} {m:>6} {kernel:<14}" + "".join(f"{t[b] * 1e3:>12.3f}ms" for b in backends)
            if len(backends) == 2:
                line += f"  {t['python'] / t['cython']:>8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
