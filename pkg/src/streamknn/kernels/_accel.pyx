# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend for the hot kernels.

Semantics match ``_numpy`` exactly: float32 rows, double accumulation,
(distance, id) tie ordering in every heap.
"""

from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _row_dist(const float[:, ::1] rows, Py_ssize_t i,
                             const double[::1] q, int metric) noexcept nogil:
    cdef Py_ssize_t d = q.shape[0]
    cdef Py_ssize_t j
    cdef double acc = 0.0
    cdef double diff
    if metric == 0:
        for j in range(d):
            diff = q[j] - <double> rows[i, j]
            acc += diff * diff
        return acc
    for j in range(d):
        acc += <double> rows[i, j] * q[j]
    return -acc


cdef inline bint _lt(double d1, cnp.int64_t i1, double d2, cnp.int64_t i2) noexcept nogil:
    # lexicographic (distance, id): the global tie rule
    if d1 != d2:
        return d1 < d2
    return i1 < i2


def dist_point(a, b, int metric):
    cdef const float[::1] av = np.ascontiguousarray(a, dtype=np.float32)
    cdef const float[::1] bv = np.ascontiguousarray(b, dtype=np.float32)
    cdef Py_ssize_t d = av.shape[0]
    cdef Py_ssize_t j
    cdef double acc = 0.0
    cdef double diff
    if metric == 0:
        for j in range(d):
            diff = <double> av[j] - <double> bv[j]
            acc += diff * diff
        return acc
    for j in range(d):
        acc += <double> av[j] * <double> bv[j]
    return -acc


def dist_matrix(query, rows, int metric):
    cdef const float[:, ::1] rv = np.ascontiguousarray(rows, dtype=np.float32)
    cdef const double[::1] qv = np.ascontiguousarray(query, dtype=np.float64)
    cdef Py_ssize_t n = rv.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _row_dist(rv, i, qv, metric)
    return out_arr


def dist_subset(query, rows, idx, int metric):
    cdef const float[:, ::1] rv = np.ascontiguousarray(rows, dtype=np.float32)
    cdef const double[::1] qv = np.ascontiguousarray(query, dtype=np.float64)
    cdef const cnp.int64_t[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t n = iv.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _row_dist(rv, iv[i], qv, metric)
    return out_arr


def adc_accumulate(tables, codes):
    cdef const double[:, ::1] tv = np.ascontiguousarray(tables, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] cv = np.ascontiguousarray(codes, dtype=np.uint8)
    cdef Py_ssize_t n = cv.shape[0]
    cdef Py_ssize_t m = cv.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += tv[j, cv[i, j]]
            out[i] = acc
    return out_arr


# ---------------------------------------------------------------------------
# best-first graph traversal

cdef struct Heap:
    double* d
    cnp.int64_t* i
    Py_ssize_t size


cdef inline void _swap(Heap* h, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double td = h.d[a]
    cdef cnp.int64_t ti = h.i[a]
    h.d[a] = h.d[b]
    h.i[a] = h.i[b]
    h.d[b] = td
    h.i[b] = ti


cdef inline void _min_push(Heap* h, double d, cnp.int64_t idx) noexcept nogil:
    cdef Py_ssize_t c = h.size
    cdef Py_ssize_t p
    h.d[c] = d
    h.i[c] = idx
    h.size += 1
    while c > 0:
        p = (c - 1) >> 1
        if _lt(h.d[c], h.i[c], h.d[p], h.i[p]):
            _swap(h, c, p)
            c = p
        else:
            break


cdef inline void _min_pop(Heap* h) noexcept nogil:
    cdef Py_ssize_t c = 0
    cdef Py_ssize_t l, r, s
    h.size -= 1
    h.d[0] = h.d[h.size]
    h.i[0] = h.i[h.size]
    while True:
        l = 2 * c + 1
        r = l + 1
        s = c
        if l < h.size and _lt(h.d[l], h.i[l], h.d[s], h.i[s]):
            s = l
        if r < h.size and _lt(h.d[r], h.i[r], h.d[s], h.i[s]):
            s = r
        if s == c:
            break
        _swap(h, c, s)
        c = s


cdef inline void _max_push(Heap* h, double d, cnp.int64_t idx) noexcept nogil:
    cdef Py_ssize_t c = h.size
    cdef Py_ssize_t p
    h.d[c] = d
    h.i[c] = idx
    h.size += 1
    while c > 0:
        p = (c - 1) >> 1
        if _lt(h.d[p], h.i[p], h.d[c], h.i[c]):
            _swap(h, c, p)
            c = p
        else:
            break


cdef inline void _max_pop(Heap* h) noexcept nogil:
    cdef Py_ssize_t c = 0
    cdef Py_ssize_t l, r, s
    h.size -= 1
    h.d[0] = h.d[h.size]
    h.i[0] = h.i[h.size]
    while True:
        l = 2 * c + 1
        r = l + 1
        s = c
        if l < h.size and _lt(h.d[s], h.i[s], h.d[l], h.i[l]):
            s = l
        if r < h.size and _lt(h.d[s], h.i[s], h.d[r], h.i[r]):
            s = r
        if s == c:
            break
        _swap(h, c, s)
        c = s


def greedy_search(rows, neigh, counts, entry, query, ef, metric, tombstones=None):
    """Best-first traversal; see the NumPy backend for the reference loop."""
    cdef const float[:, ::1] rv = np.ascontiguousarray(rows, dtype=np.float32)
    cdef const cnp.int32_t[:, ::1] nv = neigh
    cdef const cnp.int32_t[::1] cv = counts
    cdef const double[::1] qv = np.ascontiguousarray(query, dtype=np.float64)
    cdef int met = metric
    cdef Py_ssize_t cap = rv.shape[0]
    cdef Py_ssize_t efs = ef if ef > 0 else 1
    cdef cnp.int64_t ent = entry

    cdef const cnp.uint8_t[::1] tomb
    cdef bint has_tomb = tombstones is not None
    if has_tomb:
        tomb = tombstones

    visited_arr = np.zeros(cap, dtype=np.uint8)
    cdef cnp.uint8_t[::1] visited = visited_arr

    cdef Heap fr, po
    fr.d = <double*> malloc((cap + 1) * sizeof(double))
    fr.i = <cnp.int64_t*> malloc((cap + 1) * sizeof(cnp.int64_t))
    po.d = <double*> malloc((efs + 2) * sizeof(double))
    po.i = <cnp.int64_t*> malloc((efs + 2) * sizeof(cnp.int64_t))
    if fr.d == NULL or fr.i == NULL or po.d == NULL or po.i == NULL:
        free(fr.d); free(fr.i); free(po.d); free(po.i)
        raise MemoryError()
    fr.size = 0
    po.size = 0

    cdef double d0, cd, nd
    cdef cnp.int64_t cn, nb
    cdef Py_ssize_t r, m
    cdef cnp.int32_t cnt

    with nogil:
        d0 = _row_dist(rv, ent, qv, met)
        visited[ent] = 1
        _min_push(&fr, d0, ent)
        if not has_tomb or tomb[ent] == 0:
            _max_push(&po, d0, ent)

        while fr.size > 0:
            cd = fr.d[0]
            cn = fr.i[0]
            _min_pop(&fr)
            if po.size >= efs and _lt(po.d[0], po.i[0], cd, cn):
                break
            cnt = cv[cn]
            for r in range(cnt):
                nb = nv[cn, r]
                if visited[nb]:
                    continue
                visited[nb] = 1
                nd = _row_dist(rv, nb, qv, met)
                if po.size >= efs and _lt(po.d[0], po.i[0], nd, nb):
                    continue
                _min_push(&fr, nd, nb)
                if not has_tomb or tomb[nb] == 0:
                    _max_push(&po, nd, nb)
                    if po.size > efs:
                        _max_pop(&po)

    m = po.size
    ids_arr = np.empty(m, dtype=np.int64)
    dist_arr = np.empty(m, dtype=np.float64)
    cdef cnp.int64_t[::1] ids = ids_arr
    cdef double[::1] dists = dist_arr
    for r in range(m - 1, -1, -1):
        ids[r] = po.i[0]
        dists[r] = po.d[0]
        _max_pop(&po)

    free(fr.d)
    free(fr.i)
    free(po.d)
    free(po.i)
    return ids_arr, dist_arr
