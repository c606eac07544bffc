"""Compare the compiled and pure-Python permanent kernels.

Run with ``python benchmarks/bench_permanent.py``. Each row reports the
median wall time of a kernel call for both backends and their ratio.
"""
import argparse
import statistics
import time

import numpy as np

from dualfas import permanent
from dualfas.permanent import extended_permanent, extended_permanent_colderiv_log2, permanent_ryser


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def cases(rng):
    for n in (8, 12, 16):
        a = rng.random((n, n))
        yield f"ryser n={n}", lambda a=a: permanent_ryser(a)
    for m, n in ((4, 8), (8, 8), (8, 16), (12, 12)):
        a = rng.random((m, n))
        yield f"extperm {m}x{n}", lambda a=a: extended_permanent(a)
    for m, n in ((4, 8), (8, 8), (8, 16)):
        c = rng.random((m, n))
        lam = rng.dirichlet(np.ones(n)) * n
        yield f"colderiv {m}x{n}", lambda c=c, lam=lam: extended_permanent_colderiv_log2(c, lam)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)
    try:
        from dualfas.permanent import _ckernels  # noqa: F401
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    before = permanent.BACKEND
    print(f"{'kernel':<18}{'cython [ms]':>14}{'python [ms]':>14}{'speedup':>10}")
    try:
        for name, fn in cases(np.random.default_rng(0)):
            res = {}
            for backend in ("cython", "python"):
                permanent.use_backend(backend)
                fn()  # warm caches
                res[backend] = median_time(fn, args.repeats)
            print(f"{name:<18}{1e3 * res['cython']:>14.3f}{1e3 * res['python']:>14.3f}"
                  f"{res['python'] / res['cython']:>10.1f}")
    finally:
        permanent.use_backend(before)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
