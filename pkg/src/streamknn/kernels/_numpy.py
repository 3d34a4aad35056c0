"""NumPy backend for the hot kernels.

Mirrors the compiled backend exactly: double-precision accumulation,
(distance, id) tie ordering, identical traversal rules.  Slower, but has
no build requirements.
"""

import heapq

import numpy as np

_CHUNK = 8192  # rows per block when materializing float64 differences


def dist_point(a, b, metric):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if metric == 0:
        diff = a - b
        return float(diff @ diff)
    return float(-(a @ b))


def dist_matrix(query, rows, metric):
    q = np.asarray(query, dtype=np.float64)
    n = rows.shape[0]
    out = np.empty(n, dtype=np.float64)
    if metric == 1:
        # one BLAS pass; double accumulation via an f64 copy of the query
        np.negative(rows @ q, out=out)
        return out
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        diff = rows[lo:hi].astype(np.float64) - q
        out[lo:hi] = np.einsum("ij,ij->i", diff, diff)
    return out


def dist_subset(query, rows, idx, metric):
    return dist_matrix(query, rows[np.asarray(idx, dtype=np.int64)], metric)


def adc_accumulate(tables, codes):
    codes = np.asarray(codes)
    out = np.zeros(codes.shape[0], dtype=np.float64)
    for m in range(codes.shape[1]):
        out += tables[m, codes[:, m]]
    return out


def greedy_search(rows, neigh, counts, entry, query, ef, metric, tombstones=None):
    """Best-first traversal from ``entry`` with a result pool of size ``ef``.

    Expansion and the pool both order by (distance, id).  Stops when the
    frontier's best entry is worse than the pool's worst while the pool is
    full.  Tombstoned nodes are traversed but never enter the pool.
    """
    q = np.asarray(query, dtype=np.float64)
    ef = max(int(ef), 1)
    visited = np.zeros(rows.shape[0], dtype=bool)
    entry = int(entry)
    visited[entry] = True
    d0 = dist_point(rows[entry], q, metric)
    frontier = [(d0, entry)]
    pool = []  # max-heap of (-distance, -id)
    if tombstones is None or not tombstones[entry]:
        heapq.heappush(pool, (-d0, -entry))

    while frontier:
        d, node = heapq.heappop(frontier)
        if len(pool) >= ef and (d, node) > (-pool[0][0], -pool[0][1]):
            break
        nbrs = neigh[node, : counts[node]]
        fresh = nbrs[~visited[nbrs]]
        if fresh.size == 0:
            continue
        visited[fresh] = True
        dists = dist_matrix(q, rows[fresh], metric)
        for dd, nb in zip(dists.tolist(), fresh.tolist()):
            if len(pool) >= ef and (dd, nb) > (-pool[0][0], -pool[0][1]):
                continue
            heapq.heappush(frontier, (dd, nb))
            if tombstones is None or not tombstones[nb]:
                heapq.heappush(pool, (-dd, -nb))
                if len(pool) > ef:
                    heapq.heappop(pool)

    out = sorted((-d, -i) for d, i in pool)
    ids = np.fromiter((i for _, i in out), dtype=np.int64, count=len(out))
    dists = np.fromiter((d for d, _ in out), dtype=np.float64, count=len(out))
    return ids, dists
