"""Compare the compiled and NumPy kernel backends on identical inputs.

Runs every shared kernel — point/matrix/subset distances, ADC table
accumulation, and the best-first graph traversal — against both backends,
checks that they agree, and prints per-call timings with the speedup.

    python benchmarks/bench_kernels.py [--n 50000] [--d 64] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from streamknn.kernels import get_backend


def best_of(repeat: int, fn, *args):
    """Fastest wall time of ``repeat`` calls, plus the last result."""
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def build_cases(n: int, d: int, seed: int):
    """One named argument tuple per kernel, shared by both backends."""
    rng = np.random.default_rng(seed)
    rows = rng.random((n, d), dtype=np.float32)
    query = rng.random(d, dtype=np.float32)
    subset = rng.choice(n, size=min(4096, n), replace=False).astype(np.int64)

    # random regular digraph: enough structure for the traversal loop
    width = 16
    neigh = rng.integers(0, n, size=(n, width), dtype=np.int32)
    counts = np.full(n, width, dtype=np.int32)

    m, ks = 16, 256
    tables = rng.random((m, ks))
    codes = rng.integers(0, ks, size=(min(200_000, n * 4), m), dtype=np.uint8)

    return [
        ("dist_point", (rows[0], rows[1], 0)),
        ("dist_matrix", (query, rows, 0)),
        ("dist_subset", (query, rows, subset, 0)),
        ("adc_accumulate", (tables, codes)),
        ("greedy_search", (rows, neigh, counts, 0, query, 64, 0, None)),
    ]


def agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-9)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=50_000, help="stored rows")
    parser.add_argument("--d", type=int, default=64, help="dimensions")
    parser.add_argument("--repeat", type=int, default=5, help="calls per timing")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    compiled = get_backend("compiled")
    numpy_backend = get_backend("numpy")
    if compiled is None:
        print("compiled backend unavailable; timing the NumPy fallback only")

    cases = build_cases(args.n, args.d, args.seed)
    print(
        "n=%d d=%d repeat=%d\n%-16s %12s %12s %9s"
        % (args.n, args.d, args.repeat, "kernel", "numpy", "compiled", "speedup")
    )
    for name, call_args in cases:
        t_np, r_np = best_of(args.repeat, getattr(numpy_backend, name), *call_args)
        if compiled is None:
            print("%-16s %10.3gms %12s %9s" % (name, t_np * 1e3, "-", "-"))
            continue
        t_c, r_c = best_of(args.repeat, getattr(compiled, name), *call_args)
        match = "" if agree(r_np, r_c) else "  RESULTS DIFFER"
        print(
            "%-16s %10.3gms %10.3gms %8.1fx%s"
            % (name, t_np * 1e3, t_c * 1e3, t_np / t_c, match)
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
