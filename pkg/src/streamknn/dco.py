"""Search-side shortcuts for squared-L2 distance evaluation.

Two independent tools, both meant to cut the per-candidate cost of the
bottom-layer pool search in a navigation graph:

* A per-vector uniform quantizer.  Vectors are centered by a global mean
  fixed at load time; each vector then keeps only its own (min, step)
  pair plus one small unsigned code per dimension.  Distances are
  computed against the decoded approximation.
* A blockwise early-stopping rule.  Vectors and queries are rotated by a
  seeded orthogonal matrix, which spreads the squared difference evenly
  across dimensions; partial sums over dimension blocks then estimate
  the full distance, and candidates whose scaled estimate exceeds a
  radius by a safety margin are rejected without finishing the scan.

Everything here is a pure function over immutable inputs; the graph
index plug-ins live in ``indexes.hnsw_dco``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AdsParams",
    "LvqCode",
    "ads_distance",
    "apply_transform",
    "lvq_decode",
    "lvq_distance",
    "lvq_encode",
    "orthogonal_transform",
]


# ---------------------------------------------------------------------------
# per-vector uniform quantization


@dataclass(frozen=True)
class LvqCode:
    """Quantized form of one centered vector.

    ``decode(i) = vmin + codes[i] * delta`` recovers the centered value to
    within half a step per dimension.  ``delta == 0`` marks a constant
    vector, which reconstructs exactly.
    """

    vmin: float
    delta: float
    codes: np.ndarray
    bits: int = 8


def lvq_encode(vector, mean, bits: int = 8) -> LvqCode:
    """Quantize ``vector - mean`` to ``bits``-bit codes on its own range."""
    if not 1 <= bits <= 16:
        raise ValueError("bits must be in [1, 16], got %d" % bits)
    x = np.asarray(vector, dtype=np.float64) - np.asarray(mean, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("vector and mean must be 1-D with matching shapes")
    dtype = np.uint8 if bits <= 8 else np.uint16
    levels = (1 << bits) - 1
    vmin = float(x.min())
    spread = float(x.max()) - vmin
    if spread == 0.0:
        return LvqCode(vmin, 0.0, np.zeros(x.shape, dtype=dtype), bits)
    delta = spread / levels
    codes = np.clip(np.rint((x - vmin) / delta), 0, levels).astype(dtype)
    return LvqCode(vmin, delta, codes, bits)


def lvq_decode(code: LvqCode) -> np.ndarray:
    """Reconstruct the centered vector from its codes."""
    return code.vmin + code.codes.astype(np.float64) * code.delta


def lvq_distance(query, code: LvqCode, mean) -> float:
    """Squared L2 between the centered query and the decoded vector."""
    qc = np.asarray(query, dtype=np.float64) - np.asarray(mean, dtype=np.float64)
    diff = qc - lvq_decode(code)
    return float(diff @ diff)


# ---------------------------------------------------------------------------
# blockwise early stopping after a random rotation


@dataclass(frozen=True)
class AdsParams:
    """Knobs for the early-stopping rule.

    ``epsilon0`` widens the rejection threshold to keep the false-prune
    probability low (larger = safer = fewer prunes); ``block`` is the
    number of dimensions consumed between checks.
    """

    epsilon0: float = 2.1
    block: int = 32

    def __post_init__(self) -> None:
        if self.epsilon0 < 0:
            raise ValueError("epsilon0 must be >= 0, got %r" % (self.epsilon0,))
        if self.block < 1:
            raise ValueError("block must be >= 1, got %d" % self.block)


def orthogonal_transform(dim: int, seed: int = 0) -> np.ndarray:
    """Seeded random rotation: QR of a Gaussian matrix, sign-fixed.

    Fixing the signs against the R diagonal makes the factorization
    unique, so the matrix is reproducible across linear-algebra backends.
    """
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    signs = np.sign(np.diagonal(r)).copy()
    signs[signs == 0] = 1.0
    return q * signs


def apply_transform(transform: np.ndarray, vectors) -> np.ndarray:
    """Rotate one vector or a batch of row vectors."""
    return np.asarray(vectors, dtype=np.float64) @ transform


def ads_distance(query_t, vector_t, r_threshold: float, params: AdsParams | None = None):
    """Squared L2 with early rejection against a radius.

    Both inputs must already be rotated by the same orthogonal transform.
    Partial squared-difference sums are taken ``params.block`` dimensions
    at a time; after ``m`` of ``d`` dimensions the scaled estimate
    ``partial * d / m`` is compared to ``r_threshold**2`` inflated by
    ``(1 + epsilon0 / sqrt(m))**2``, and the pair is rejected when the
    estimate exceeds it.  Returns ``(distance, dims_used)``; a rejection
    reports ``(None, m)``, while a completed scan always reports the
    exact squared distance with ``dims_used == d``.
    """
    if params is None:
        params = AdsParams()
    q = np.asarray(query_t, dtype=np.float64)
    v = np.asarray(vector_t, dtype=np.float64)
    if q.shape != v.shape or q.ndim != 1:
        raise ValueError(
            "query and vector must be 1-D with matching shapes, got %s and %s"
            % (q.shape, v.shape)
        )
    d = q.shape[0]
    r2 = float(r_threshold) * float(r_threshold)
    partial = 0.0
    m = 0
    while m < d:
        stop = min(m + params.block, d)
        seg = v[m:stop] - q[m:stop]
        partial += float(seg @ seg)
        m = stop
        if m == d:
            break
        margin = 1.0 + params.epsilon0 / math.sqrt(m)
        if partial * (d / m) > r2 * margin * margin:
            return None, m
    return partial, d
