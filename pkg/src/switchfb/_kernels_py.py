"""Pure-Python versions of the compiled simulator kernels (same signatures and results)."""
from __future__ import annotations

import numpy as np
from scipy.stats import binom


def scan_typical(book, ctx, table, lo, hi, start: int = 0) -> int:
    """First row r >= start whose joint type with ``ctx`` lies in the box [lo, hi], else -1."""
    book = np.asarray(book)
    if start >= book.shape[0]:
        return -1
    cells = np.asarray(table)[book[start:], np.asarray(ctx)[None, :]]
    ncell = len(lo)
    offs = cells + ncell * np.arange(cells.shape[0])[:, None]
    counts = np.bincount(offs.ravel(), minlength=ncell * cells.shape[0]).reshape(-1, ncell)
    ok = np.all((counts >= lo) & (counts <= hi), axis=1)
    hits = np.flatnonzero(ok)
    return int(hits[0] + start) if hits.size else -1


def box_probability(n: int, probs, lo, hi) -> float:
    """P(lo <= N <= hi) for N ~ Multinomial(n, probs), via the chain of conditional binomials."""
    probs = np.asarray(probs, dtype=float)
    k = probs.size
    f = np.zeros(n + 1)
    f[n] = 1.0
    rest = 1.0
    r = np.arange(n + 1)
    for a in range(k):
        q = 1.0 if (a == k - 1 or rest <= 0) else min(probs[a] / rest, 1.0)
        g = np.zeros(n + 1)
        for j in range(int(lo[a]), min(int(hi[a]), n) + 1):
            w = f[j:] * binom.pmf(j, r[j:], q)
            g[: n + 1 - j] += w
        f = g
        rest -= probs[a]
    return float(f[0])
