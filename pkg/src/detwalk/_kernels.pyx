# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled emission kernels.

Array layout (shared with ``_pykernels``): arcs of vertex v occupy
``indptr[v]:indptr[v+1]`` in ascending neighbor order; ``probs``, ``cum``,
``mult``, ``counts`` and ``flows`` are per-arc; ``period`` and ``served`` are
per-vertex.
"""

from libc.stdint cimport int64_t, uint64_t
from libc.math cimport ldexp

cdef enum:
    SRT = 0
    BILLIARD = 1
    VDC = 2
    ROTOR = 3


cdef inline double _psi(uint64_t i) noexcept nogil:
    cdef uint64_t r = 0
    cdef int b
    for b in range(64):
        r = (r << 1) | (i & 1)
        i >>= 1
    return ldexp(<double>r, -64)


def van_der_corput(uint64_t i):
    return _psi(i)


cdef inline int64_t _pick(int kind, const double[::1] probs, const double[::1] cum,
                          int64_t[::1] counts, int64_t s, int64_t e,
                          int64_t i) noexcept nogil:
    cdef int64_t a, best = -1
    cdef double x
    if kind == VDC:
        x = _psi(<uint64_t>i)
        for a in range(s, e):
            if x < cum[a]:
                return a
        return e - 1
    for a in range(s, e):
        if kind == SRT and <double>counts[a] - <double>(i + 1) * probs[a] >= 0.0:
            continue
        if best < 0 or (<double>counts[a] + 1.0) * probs[best] < (<double>counts[best] + 1.0) * probs[a]:
            best = a
    return best


cdef inline int64_t _rotor_count(int64_t x, int64_t per, int64_t off, int64_t m) noexcept nogil:
    cdef int64_t r = x % per - off
    if r < 0:
        r = 0
    elif r > m:
        r = m
    return (x // per) * m + r


cdef int64_t _emit_range(int kind, const int64_t[::1] indptr, const double[::1] probs,
                         const double[::1] cum, const int64_t[::1] mult, const int64_t[::1] period,
                         int64_t[::1] counts, int64_t[::1] served, const int64_t[::1] chi,
                         int64_t[::1] flows, int64_t lo, int64_t hi) noexcept nogil:
    cdef int64_t v, a, s, e, k, j, i, best, off, c0, c1
    for v in range(lo, hi):
        s = indptr[v]
        e = indptr[v + 1]
        for a in range(s, e):
            flows[a] = 0
        k = chi[v]
        if k == 0:
            continue
        if kind == ROTOR:
            off = 0
            i = served[v]
            for a in range(s, e):
                c0 = _rotor_count(i, period[v], off, mult[a])
                c1 = _rotor_count(i + k, period[v], off, mult[a])
                flows[a] = c1 - c0
                counts[a] += c1 - c0
                off += mult[a]
            served[v] = i + k
            continue
        for j in range(k):
            i = served[v]
            best = _pick(kind, probs, cum, counts, s, e, i)
            if best < 0:
                return v
            counts[best] += 1
            flows[best] += 1
            served[v] = i + 1
    return -1


def emit_range(int kind, const int64_t[::1] indptr, const double[::1] probs, const double[::1] cum,
               const int64_t[::1] mult, const int64_t[::1] period, int64_t[::1] counts,
               int64_t[::1] served, const int64_t[::1] chi, int64_t[::1] flows,
               int64_t lo, int64_t hi):
    """Serve ``chi[v]`` tokens from every vertex in ``[lo, hi)``.

    Returns -1, or the first vertex whose router found no admissible neighbor.
    """
    cdef int64_t bad
    with nogil:
        bad = _emit_range(kind, indptr, probs, cum, mult, period, counts, served,
                          chi, flows, lo, hi)
    return bad


def emit_sequence(int kind, const double[::1] probs, const double[::1] cum,
                  const int64_t[::1] mult, int64_t period, int64_t[::1] counts,
                  int64_t served, int64_t[::1] out):
    """Emit ``len(out)`` values of one router, writing local neighbor positions.

    Returns the number of values emitted (short only on router corruption).
    """
    cdef int64_t n = out.shape[0], e = probs.shape[0], j = 0, a, p, acc, best = 0
    with nogil:
        for j in range(n):
            if kind == ROTOR:
                p = served % period
                acc = 0
                best = e - 1
                for a in range(e):
                    acc += mult[a]
                    if p < acc:
                        best = a
                        break
            else:
                best = _pick(kind, probs, cum, counts, 0, e, served)
                if best < 0:
                    break
            counts[best] += 1
            out[j] = best
            served += 1
    return j if best < 0 else n
