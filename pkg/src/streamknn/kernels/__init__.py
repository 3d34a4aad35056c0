"""Hot numeric kernels with two interchangeable backends.

The compiled Cython backend is used when the extension built; otherwise
the NumPy fallback takes over.  Set ``STREAMKNN_PURE=1`` to force the
fallback (useful for the backend benchmark and for debugging).

Shared contract, identical across backends:

* metric code: 0 = squared L2, 1 = negative inner product
* stored rows are C-contiguous float32; distances come back as float64
  accumulated in double precision
* all orderings break distance ties by ascending id

Functions:

* ``dist_point(a, b, metric)`` -> float
* ``dist_matrix(query, rows, metric)`` -> (n,) float64
* ``dist_subset(query, rows, idx, metric)`` -> (len(idx),) float64
* ``adc_accumulate(tables, codes)`` -> (n,) float64 table-lookup sums
* ``greedy_search(rows, neigh, counts, entry, query, ef, metric,
  tombstones=None)`` -> (ids int64, dists float64) best-first traversal
  pool sorted by (distance, id)
"""

import os

_force_pure = os.environ.get("STREAMKNN_PURE", "").strip() not in ("", "0")

if _force_pure:
    from . import _numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _accel as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _numpy as _impl

        BACKEND = "numpy"

HAVE_COMPILED = BACKEND == "compiled"

dist_point = _impl.dist_point
dist_matrix = _impl.dist_matrix
dist_subset = _impl.dist_subset
adc_accumulate = _impl.adc_accumulate
greedy_search = _impl.greedy_search


def get_backend(name):
    """Return a specific backend module ('compiled' or 'numpy') or None."""
    if name == "numpy":
        from . import _numpy

        return _numpy
    if name == "compiled":
        try:
            from . import _accel

            return _accel
        except ImportError:
            return None
    raise ValueError("unknown backend %r" % name)
