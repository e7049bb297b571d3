"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both implementations are always importable from permforce._kernels; the
PERMFORCE_DISABLE_NUMBA flag only changes which one the dispatchers pick.
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from permforce import _kernels
from permforce.permuton import _monotone_arrays, perturbed_array


def best_of(fn, repeat: int) -> float:
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--draws", type=int, default=1 << 16)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = []
    for k in (3, 4, 5):
        xs, ys = rng.random((args.draws, k)), rng.random((args.draws, k))
        cases.append((f"pattern codes k={k}, {args.draws} draws",
                      lambda xs=xs, ys=ys: _kernels.pattern_codes_numba(xs, ys),
                      lambda xs=xs, ys=ys: _kernels.pattern_codes_numpy(xs, ys)))
    for k, n in ((3, 6), (4, 6), (4, 9), (5, 8)):
        rows, w = _monotone_arrays(k, n)
        mat = perturbed_array(n, rng.uniform(-0.01, 0.01, (n - 1) ** 2))
        perm0 = np.arange(k)[::-1].copy()
        cases.append((f"step value+grad k={k}, n={n}, {len(w)} maps",
                      lambda a=(mat, rows, w, rows, w, perm0): _kernels.step_value_grad_numba(*a),
                      lambda a=(mat, rows, w, rows, w, perm0): _kernels.step_value_grad_numpy(*a)))

    print(f"numba available: {_kernels.HAVE_NUMBA}; dispatch backend: {_kernels.BACKEND}")
    print(f"{'case':45s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, fast, slow in cases:
        tf = best_of(fast, args.repeat) if _kernels.HAVE_NUMBA else math.nan
        ts = best_of(slow, args.repeat)
        print(f"{name:45s} {tf * 1e3:11.2f} {ts * 1e3:11.2f} {ts / tf:8.1f}x")


if __name__ == "__main__":
    main()
