"""Compare the compiled simulator kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Both implementations are timed on the
same inputs and their results are checked for agreement before timings are reported.
"""
import argparse
import time

import numpy as np

from switchfb import _kernels_py
from switchfb.info import typical_count_bounds

try:
    from switchfb import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def scan_case(rows, n, seed=0):
    # adder channel with uniform inputs: cells are (x1, x2, y_d) with y_d in {0, 1, 2, e}
    rng = np.random.default_rng(seed)
    k1, k2, nyd = 2, 2, 4
    mass = np.zeros((k1, k2, nyd))
    for a in range(2):
        for b in range(2):
            mass[a, b, a + b] = 0.125
            mass[a, b, 3] = 0.125
    lo, hi = typical_count_bounds(mass.ravel(), n, 0.3)
    book = rng.integers(0, k2, size=(rows, n)).astype(np.int64)
    x1 = rng.integers(0, k1, n)
    y = np.where(rng.random(n) < 0.5, 3, x1 + book[rows - 1])
    ctx = (x1 * nyd + y).astype(np.int64)
    ctx_x1, ctx_y = np.divmod(np.arange(k1 * nyd), nyd)
    table = np.ascontiguousarray((ctx_x1[None, :] * k2 + np.arange(k2)[:, None]) * nyd + ctx_y[None, :],
                                 dtype=np.int64)
    return book, ctx, table, lo.astype(np.int64), hi.astype(np.int64)


def box_case(n, k, seed=0):
    rng = np.random.default_rng(seed)
    probs = rng.dirichlet(np.ones(k))
    mean = n * probs
    lo = np.floor(0.7 * mean).astype(np.int64)
    hi = np.ceil(1.3 * mean).astype(np.int64)
    return n, probs, lo, hi


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; only the fallback is available")
    print(f"{'kernel':<16} {'size':<16} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for rows, n in [(1024, 60), (16384, 120)]:
        case = scan_case(rows, n)
        tp, rp = best_of(lambda: _kernels_py.scan_typical(*case), args.repeat)
        line = f"{'scan_typical':<16} {f'{rows}x{n}':<16} {tp:>10.4f}"
        if _kernels is not None:
            tc, rc = best_of(lambda: _kernels.scan_typical(*case), args.repeat)
            assert rc == rp, (rc, rp)
            line += f" {tc:>11.4f} {tp / tc:>7.1f}x"
        print(line)
    for n, k in [(60, 4), (240, 8)]:
        case = box_case(n, k)
        tp, vp = best_of(lambda: _kernels_py.box_probability(*case), args.repeat)
        line = f"{'box_probability':<16} {f'n={n} k={k}':<16} {tp:>10.4f}"
        if _kernels is not None:
            tc, vc = best_of(lambda: _kernels.box_probability(*case), args.repeat)
            assert abs(vc - vp) <= 1e-9 * max(1.0, abs(vp)), (vc, vp)
            line += f" {tc:>11.4f} {tp / tc:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
