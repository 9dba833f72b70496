# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch kernels. Same contract as derange._pykernels."""
import numpy as np

from libc.stdint cimport uint64_t, int64_t, int32_t, uint8_t
from libc.stdlib cimport malloc, free
from libc.math cimport fabs

cdef extern from "_xoshiro.h" nogil:
    uint64_t xo_next(uint64_t *s)
    uint64_t xo_below(uint64_t *s, uint64_t n)
    double xo_unit_open(uint64_t *s)


cdef inline void _load(uint64_t[::1] state, uint64_t *s):
    if state.shape[0] != 4:
        raise ValueError("state must be a uint64[4] array")
    s[0] = state[0]; s[1] = state[1]; s[2] = state[2]; s[3] = state[3]


cdef inline void _store(uint64_t[::1] state, uint64_t *s):
    state[0] = s[0]; state[1] = s[1]; state[2] = s[2]; state[3] = s[3]


cdef inline int _same_cycle(int32_t *sigma, int32_t i, int32_t j) noexcept nogil:
    cdef int32_t a = sigma[i]
    cdef int32_t b = sigma[j]
    while True:
        if a == j or b == i:
            return 1
        if a == i or b == j:
            return 0
        a = sigma[a]
        b = sigma[b]


cdef inline int _walk_step(int32_t *sigma, int32_t i, int32_t j, bint matching) noexcept nogil:
    cdef int32_t a = sigma[i]
    cdef int32_t b = sigma[j]
    cdef int delta
    if a == j or b == i or i == j:
        return 0
    if matching:
        sigma[i] = b
        sigma[j] = a
        sigma[a] = j
        sigma[b] = i
        return 0
    delta = 1 if _same_cycle(sigma, i, j) else -1
    sigma[i] = b
    sigma[j] = a
    return delta


def u64_block(uint64_t[::1] state, Py_ssize_t count):
    cdef uint64_t s[4]
    _load(state, s)
    out = np.empty(count, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t r
    with nogil:
        for r in range(count):
            o[r] = xo_next(s)
    _store(state, s)
    return out


def below_block(uint64_t[::1] state, uint64_t n, Py_ssize_t count):
    if n < 1:
        raise ValueError("n must be >= 1")
    cdef uint64_t s[4]
    _load(state, s)
    out = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t r
    with nogil:
        for r in range(count):
            o[r] = <int64_t>xo_below(s, n)
    _store(state, s)
    return out


def unit_block(uint64_t[::1] state, Py_ssize_t count):
    cdef uint64_t s[4]
    _load(state, s)
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t r
    with nogil:
        for r in range(count):
            o[r] = xo_unit_open(s)
    _store(state, s)
    return out


def sattolo_batch(uint64_t[::1] state, int32_t n, Py_ssize_t count):
    cdef uint64_t s[4]
    _load(state, s)
    out = np.empty((count, n), dtype=np.int32)
    cdef int32_t[:, ::1] o = out
    cdef Py_ssize_t r
    cdef int32_t i, j, tmp
    cdef int32_t *p
    with nogil:
        for r in range(count):
            p = &o[r, 0]
            for i in range(n):
                p[i] = i
            for i in range(n - 1, 0, -1):
                j = <int32_t>xo_below(s, <uint64_t>i)
                tmp = p[i]; p[i] = p[j]; p[j] = tmp
    _store(state, s)
    return out


def walk_batch(uint64_t[::1] state, init, Py_ssize_t mix, Py_ssize_t count, bint matching):
    cdef int32_t[::1] base = np.ascontiguousarray(init, dtype=np.int32)
    cdef int32_t n = <int32_t>base.shape[0]
    cdef uint64_t s[4]
    _load(state, s)
    out = np.empty((count, n), dtype=np.int32)
    cdef int32_t[:, ::1] o = out
    cdef Py_ssize_t r, m
    cdef int32_t i, j, a, b, q
    cdef int32_t *sigma
    with nogil:
        for r in range(count):
            sigma = &o[r, 0]
            for q in range(n):
                sigma[q] = base[q]
            for m in range(mix):
                i = <int32_t>xo_below(s, <uint64_t>n)
                j = <int32_t>xo_below(s, <uint64_t>n)
                a = sigma[i]
                b = sigma[j]
                if a != j and b != i and i != j:
                    sigma[i] = b
                    sigma[j] = a
                    if matching:
                        sigma[a] = j
                        sigma[b] = i
    _store(state, s)
    return out


def walk_trace(uint64_t[::1] state, init, Py_ssize_t mix, bint matching, int k0):
    cdef int32_t[::1] base = np.ascontiguousarray(init, dtype=np.int32)
    cdef int32_t n = <int32_t>base.shape[0]
    cdef uint64_t s[4]
    _load(state, s)
    states = np.empty((mix + 1, n), dtype=np.int32)
    kcounts = np.empty(mix + 1, dtype=np.int32)
    cdef int32_t[:, ::1] st = states
    cdef int32_t[::1] kc = kcounts
    cdef Py_ssize_t t
    cdef int32_t i, j, q
    cdef int k = k0
    cdef int32_t *sigma = <int32_t *>malloc(n * sizeof(int32_t))
    if sigma == NULL:
        raise MemoryError()
    try:
        for q in range(n):
            sigma[q] = base[q]
            st[0, q] = sigma[q]
        kc[0] = k
        with nogil:
            for t in range(1, mix + 1):
                i = <int32_t>xo_below(s, <uint64_t>n)
                j = <int32_t>xo_below(s, <uint64_t>n)
                k += _walk_step(sigma, i, j, matching)
                for q in range(n):
                    st[t, q] = sigma[q]
                kc[t] = k
    finally:
        free(sigma)
    _store(state, s)
    return states, kcounts


def sis_batch(uint64_t[::1] state, int32_t n, Py_ssize_t count):
    cdef uint64_t s[4]
    _load(state, s)
    perms = np.empty((count, n), dtype=np.int32)
    ok = np.ones(count, dtype=np.uint8)
    draws = np.zeros(count, dtype=np.int64)
    cdef int32_t[:, ::1] o = perms
    cdef uint8_t[::1] okv = ok
    cdef int64_t[::1] dv = draws
    cdef int32_t *pool = <int32_t *>malloc(n * sizeof(int32_t))
    if pool == NULL:
        raise MemoryError()
    cdef Py_ssize_t r
    cdef int32_t i, size, idx, v
    cdef int64_t used
    try:
        with nogil:
            for r in range(count):
                for i in range(n):
                    pool[i] = i
                size = n
                used = 0
                for i in range(n):
                    if size == 1 and pool[0] == i:
                        o[r, i] = -1
                        okv[r] = 0
                        break
                    while True:
                        idx = <int32_t>xo_below(s, <uint64_t>size)
                        used += 1
                        v = pool[idx]
                        if v != i:
                            break
                    o[r, i] = v
                    size -= 1
                    pool[idx] = pool[size]
                dv[r] = used
    finally:
        free(pool)
    _store(state, s)
    return perms, ok, draws


def sis_fail_count(uint64_t[::1] state, int32_t n, Py_ssize_t attempts):
    cdef uint64_t s[4]
    _load(state, s)
    cdef int32_t *pool = <int32_t *>malloc(n * sizeof(int32_t))
    if pool == NULL:
        raise MemoryError()
    cdef Py_ssize_t r
    cdef int64_t failures = 0
    cdef int32_t i, size, idx
    try:
        with nogil:
            for r in range(attempts):
                for i in range(n):
                    pool[i] = i
                size = n
                for i in range(n):
                    if size == 1 and pool[0] == i:
                        failures += 1
                        break
                    while True:
                        idx = <int32_t>xo_below(s, <uint64_t>size)
                        if pool[idx] != i:
                            break
                    size -= 1
                    pool[idx] = pool[size]
    finally:
        free(pool)
    _store(state, s)
    return failures


def reject_batch(uint64_t[::1] state, int32_t n, Py_ssize_t count):
    cdef uint64_t s[4]
    _load(state, s)
    out = np.empty((count, n), dtype=np.int32)
    cdef int32_t[:, ::1] o = out
    cdef Py_ssize_t r
    cdef int64_t attempts = 0
    cdef int32_t i, j, tmp
    cdef bint good
    cdef int32_t *p
    with nogil:
        for r in range(count):
            p = &o[r, 0]
            while True:
                attempts += 1
                for i in range(n):
                    p[i] = i
                for i in range(n - 1, 0, -1):
                    j = <int32_t>xo_below(s, <uint64_t>(i + 1))
                    tmp = p[i]; p[i] = p[j]; p[j] = tmp
                good = True
                for i in range(n):
                    if p[i] == i:
                        good = False
                        break
                if good:
                    break
    _store(state, s)
    return out, attempts


def cycle_counts(perms):
    cdef int32_t[:, ::1] p = np.ascontiguousarray(perms, dtype=np.int32)
    cdef Py_ssize_t count = p.shape[0]
    cdef Py_ssize_t n = p.shape[1]
    out = np.empty(count, dtype=np.int32)
    cdef int32_t[::1] o = out
    cdef uint8_t *seen = <uint8_t *>malloc(n + 1)
    if seen == NULL:
        raise MemoryError()
    cdef Py_ssize_t r, start
    cdef int32_t k, x
    try:
        with nogil:
            for r in range(count):
                for start in range(n):
                    seen[start] = 0
                k = 0
                for start in range(n):
                    if not seen[start]:
                        k += 1
                        x = <int32_t>start
                        while not seen[x]:
                            seen[x] = 1
                            x = p[r, x]
                o[r] = k
    finally:
        free(seen)
    return out


def mixing_ensemble(uint64_t[::1] state, int32_t n, Py_ssize_t runs, Py_ssize_t max_t):
    cdef uint64_t s[4]
    _load(state, s)
    cdef Py_ssize_t width = n // 2 + 1
    counts = np.zeros((max_t + 1, width), dtype=np.int64)
    cdef int64_t[:, ::1] c = counts
    cdef int32_t *sigma = <int32_t *>malloc(n * sizeof(int32_t))
    if sigma == NULL:
        raise MemoryError()
    cdef Py_ssize_t r, t
    cdef int32_t i, j, q
    cdef int k
    try:
        with nogil:
            for r in range(runs):
                for q in range(n):
                    sigma[q] = (q + 1) % n
                k = 1
                c[0, 1] += 1
                for t in range(1, max_t + 1):
                    i = <int32_t>xo_below(s, <uint64_t>n)
                    j = <int32_t>xo_below(s, <uint64_t>n)
                    k += _walk_step(sigma, i, j, False)
                    c[t, k] += 1
    finally:
        free(sigma)
    _store(state, s)
    return counts


def mixing_time_average(uint64_t[::1] state, int32_t n, Py_ssize_t runs, Py_ssize_t max_t, nu):
    cdef double[::1] nuv = np.ascontiguousarray(nu, dtype=np.float64)
    cdef uint64_t s[4]
    _load(state, s)
    cdef int32_t half = n // 2
    traj = np.zeros(max_t + 1, dtype=np.float64)
    cdef double[::1] tr = traj
    cdef int32_t *sigma = <int32_t *>malloc(n * sizeof(int32_t))
    cdef int64_t *hist = <int64_t *>malloc((half + 1) * sizeof(int64_t))
    cdef double *tail = <double *>malloc((half + 2) * sizeof(double))
    if sigma == NULL or hist == NULL or tail == NULL:
        free(sigma); free(hist); free(tail)
        raise MemoryError()
    cdef Py_ssize_t r, t
    cdef int32_t i, j, q, kk
    cdef int k, kmax
    cdef double d, inv, d0
    tail[half + 1] = 0.0
    for kk in range(half, 0, -1):
        tail[kk] = tail[kk + 1] + nuv[kk]
    d0 = 0.5 * (fabs(1.0 - nuv[1]) + tail[2])
    try:
        with nogil:
            for r in range(runs):
                for q in range(n):
                    sigma[q] = (q + 1) % n
                for kk in range(half + 1):
                    hist[kk] = 0
                k = 1
                kmax = 1
                tr[0] += d0
                for t in range(1, max_t + 1):
                    i = <int32_t>xo_below(s, <uint64_t>n)
                    j = <int32_t>xo_below(s, <uint64_t>n)
                    k += _walk_step(sigma, i, j, False)
                    hist[k] += 1
                    if k > kmax:
                        kmax = k
                    inv = 1.0 / <double>t
                    d = tail[kmax + 1]
                    for kk in range(1, kmax + 1):
                        d = d + fabs(<double>hist[kk] * inv - nuv[kk])
                    tr[t] += 0.5 * d
    finally:
        free(sigma)
        free(hist)
        free(tail)
    _store(state, s)
    return traj


def rank_derangements(perms, table):
    cdef int32_t[:, ::1] p = np.ascontiguousarray(perms, dtype=np.int32)
    cdef int64_t[:, ::1] f = np.ascontiguousarray(table, dtype=np.int64)
    cdef Py_ssize_t count = p.shape[0]
    cdef int32_t n = <int32_t>p.shape[1]
    out = np.empty(count, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef uint8_t *used = <uint8_t *>malloc(n + 1)
    if used == NULL:
        raise MemoryError()
    cdef Py_ssize_t r
    cdef int32_t i, q, v, m, target, free_after
    cdef int64_t rank
    try:
        with nogil:
            for r in range(count):
                for q in range(n):
                    used[q] = 0
                rank = 0
                for i in range(n):
                    m = n - i - 1
                    free_after = 0
                    for q in range(i + 1, n):
                        if not used[q]:
                            free_after += 1
                    target = p[r, i]
                    for v in range(target):
                        if used[v] or v == i:
                            continue
                        if v > i:
                            rank += f[m, free_after - 1]
                        else:
                            rank += f[m, free_after]
                    used[target] = 1
                o[r] = rank
    finally:
        free(used)
    return out
