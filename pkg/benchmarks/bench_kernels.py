"""Compare the compiled Jacobi kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--sizes 16 32 64] [--repeat 3]

Prints the best wall time of each backend, the speed-up and the largest
eigenvalue / singular value disagreement between them.
"""
import argparse
import time

import numpy as np

from qbtrace import _kernels_py

try:
    from qbtrace import _kernels
except ImportError:  # extension not built
    _kernels = None


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels are not built; only the Python backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<6} {'n':>5} {'python s':>10} {'compiled s':>11} {'speed-up':>9} {'max diff':>10}")
    for n in args.sizes:
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h = np.ascontiguousarray(0.5 * (x + x.conj().T))
        for name, arg, pick in (("eigh", h, lambda r: np.sort(r[0])), ("svd", x, lambda r: np.sort(r[0]))):
            tp, rp = best_time(lambda: getattr(_kernels_py, f"jacobi_{name}")(arg), args.repeat)
            if _kernels is None:
                print(f"{name:<6} {n:>5} {tp:>10.4f} {'-':>11} {'-':>9} {'-':>10}")
                continue
            tc, rc = best_time(lambda: getattr(_kernels, f"jacobi_{name}")(arg), args.repeat)
            diff = float(np.max(np.abs(pick(rp) - pick(rc))))
            print(f"{name:<6} {n:>5} {tp:>10.4f} {tc:>11.4f} {tp / tc:>9.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
