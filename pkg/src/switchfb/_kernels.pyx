# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for the simulator: typical-row scanning and multinomial box probabilities."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, lgamma
from libc.stdlib cimport calloc, free

cnp.import_array()


def scan_typical(const cnp.int64_t[:, ::1] book, const cnp.int64_t[::1] ctx, const cnp.int64_t[:, ::1] table,
                 const cnp.int64_t[::1] lo, const cnp.int64_t[::1] hi, Py_ssize_t start=0):
    """First row r >= start whose joint type with ``ctx`` lies in the box [lo, hi], else -1."""
    cdef Py_ssize_t rows = book.shape[0], n = book.shape[1], ncell = lo.shape[0]
    cdef Py_ssize_t r, i, c
    cdef cnp.int64_t cell
    cdef bint ok
    cdef cnp.int64_t* counts = <cnp.int64_t*> calloc(ncell, sizeof(cnp.int64_t))
    if counts == NULL:
        raise MemoryError()
    cdef Py_ssize_t found = -1
    try:
        with nogil:
            for r in range(start, rows):
                for c in range(ncell):
                    counts[c] = 0
                ok = True
                for i in range(n):
                    cell = table[book[r, i], ctx[i]]
                    counts[cell] += 1
                    if counts[cell] > hi[cell]:
                        ok = False
                        break
                if ok:
                    for c in range(ncell):
                        if counts[c] < lo[c]:
                            ok = False
                            break
                if ok:
                    found = r
                    break
    finally:
        free(counts)
    return found


cdef inline double _log_binom_pmf(Py_ssize_t j, Py_ssize_t r, double logq, double log1mq) nogil:
    cdef double v = lgamma(r + 1.0) - lgamma(j + 1.0) - lgamma(r - j + 1.0)
    if j > 0:
        v += j * logq
    if r - j > 0:
        v += (r - j) * log1mq
    return v


def box_probability(Py_ssize_t n, const double[::1] probs, const cnp.int64_t[::1] lo, const cnp.int64_t[::1] hi):
    """P(lo <= N <= hi) for N ~ Multinomial(n, probs), via the chain of conditional binomials."""
    cdef Py_ssize_t k = probs.shape[0], a, r, j, jmax
    cdef double rest = 1.0, q, logq, log1mq, total, w
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f = np.zeros(n + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g
    f[n] = 1.0
    for a in range(k):
        g = np.zeros(n + 1)
        if a == k - 1 or rest <= 0.0:
            q = 1.0
        else:
            q = probs[a] / rest
            if q > 1.0:
                q = 1.0
        logq = log(q) if q > 0.0 else -1e300
        log1mq = log(1.0 - q) if q < 1.0 else -1e300
        for r in range(n + 1):
            if f[r] == 0.0:
                continue
            jmax = hi[a] if hi[a] < r else r
            for j in range(lo[a], jmax + 1):
                if q == 1.0:
                    if j != r:
                        continue
                    w = 1.0
                elif q == 0.0:
                    if j != 0:
                        continue
                    w = 1.0
                else:
                    w = exp(_log_binom_pmf(j, r, logq, log1mq))
                g[r - j] += f[r] * w
        f = g
        rest -= probs[a]
    return float(f[0])
