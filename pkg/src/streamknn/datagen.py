"""Synthetic workload generators and on-disk vector formats.

Two generators cover the benchmark's needs: i.i.d. uniform rows, and a
distribution-shift stream where rows after a chosen position start coming
from a second, shifted Gaussian component with a given contamination
probability.

File formats:

* ``.fvecs``: per record, a little-endian int32 dimensionality followed
  by that many little-endian float32 values.
* ``.ivecs``: same container with int32 payloads (ground-truth id lists).
* raw matrix: a text descriptor (``key=value`` lines: n, d, dtype=f32,
  blob=<file>) next to a row-major float32 blob.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import VectorRecord, make_records


class FormatError(ValueError):
    """A vector file is malformed; the message names the byte offset."""


def gen_random(n: int, d: int, seed: int) -> np.ndarray:
    """Uniform [0, 1) rows, deterministic for a fixed seed."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    rng = np.random.default_rng(seed)
    return rng.random((n, d), dtype=np.float32)


@dataclass(slots=True)
class DriftSpec:
    """A stream whose distribution shifts partway through.

    Rows before ``position`` are drawn from component A, a unit-variance
    Gaussian at the origin.  From ``position`` on, each row comes from
    component B with probability ``contamination`` and from A otherwise.
    B is A translated by ``shift`` along the first axis.
    """

    n: int
    d: int
    position: int
    contamination: float
    shift: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.position <= self.n:
            raise ValueError("position must lie within [0, n]")
        if not 0.0 <= self.contamination <= 1.0:
            raise ValueError("contamination must lie within [0, 1]")
        if self.d < 1:
            raise ValueError("d must be >= 1")


def drift_matrix(spec: DriftSpec) -> tuple[np.ndarray, np.ndarray]:
    """Matrix plus per-row component labels (0 = A, 1 = B)."""
    rng = np.random.default_rng(spec.seed)
    rows = rng.standard_normal((spec.n, spec.d)).astype(np.float32)
    labels = np.zeros(spec.n, dtype=np.int8)
    if spec.position < spec.n:
        tail = spec.n - spec.position
        pick_b = rng.random(tail) < spec.contamination
        labels[spec.position :][pick_b] = 1
        rows[spec.position :][pick_b, 0] += np.float32(spec.shift)
    return rows, labels


def gen_drift(spec: DriftSpec) -> list[VectorRecord]:
    """Drift stream as records with dense ids in emission order."""
    rows, _ = drift_matrix(spec)
    return make_records(rows)


def sample_drift_queries(spec: DriftSpec, count: int, seed: int) -> np.ndarray:
    """Held-out queries matching the post-position mixture of ``spec``."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((count, spec.d)).astype(np.float32)
    pick_b = rng.random(count) < spec.contamination
    q[pick_b, 0] += np.float32(spec.shift)
    return q


# ---------------------------------------------------------------------------
# fvecs / ivecs

def _write_vecs(path: str, data: np.ndarray, payload: str) -> None:
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("expected an (n, d) matrix")
    n, d = data.shape
    if d < 1:
        raise ValueError("cannot write zero-dimensional records")
    # header and payload are both 4-byte little-endian; interleave via a bit view
    out = np.empty((n, d + 1), dtype="<i4")
    out[:, 0] = d
    body = np.ascontiguousarray(data, dtype="<%s" % payload)
    out[:, 1:] = body.view("<i4")
    out.tofile(path)


def write_fvecs(path: str, data: np.ndarray) -> None:
    _write_vecs(path, np.asarray(data, dtype=np.float32), "f4")


def write_ivecs(path: str, data: np.ndarray) -> None:
    _write_vecs(path, np.asarray(data, dtype=np.int32), "i4")


def _load_vecs(path: str, payload: str) -> np.ndarray:
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0:
        return np.empty((0, 0), dtype=payload)
    if raw.size < 4:
        raise FormatError("%s: truncated header at byte 0" % path)
    d = int(raw[:4].view("<i4")[0])
    if d < 1:
        raise FormatError("%s: non-positive dimensionality %d at byte 0" % (path, d))
    rec_bytes = 4 + 4 * d
    if raw.size % rec_bytes != 0:
        offset = (raw.size // rec_bytes) * rec_bytes
        raise FormatError(
            "%s: truncated record at byte %d (record size %d)" % (path, offset, rec_bytes)
        )
    n = raw.size // rec_bytes
    mat = raw.view("<i4").reshape(n, d + 1)
    dims = mat[:, 0]
    if not np.all(dims == d):
        bad = int(np.flatnonzero(dims != d)[0])
        raise FormatError(
            "%s: inconsistent dimensionality %d at byte %d (expected %d)"
            % (path, int(dims[bad]), bad * rec_bytes, d)
        )
    body = mat[:, 1:]
    if payload == "f4":
        return np.ascontiguousarray(body.view("<f4"), dtype=np.float32)
    return np.ascontiguousarray(body, dtype=np.int32)


def load_fvecs(path: str) -> np.ndarray:
    return _load_vecs(path, "f4")


def load_ivecs(path: str) -> np.ndarray:
    return _load_vecs(path, "i4")


# ---------------------------------------------------------------------------
# raw float32 matrix with sidecar descriptor

def write_raw(descriptor_path: str, data: np.ndarray, blob_name: str | None = None) -> None:
    data = np.ascontiguousarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ValueError("expected an (n, d) matrix")
    if blob_name is None:
        blob_name = os.path.basename(descriptor_path) + ".f32"
    blob_path = os.path.join(os.path.dirname(descriptor_path) or ".", blob_name)
    data.astype("<f4").tofile(blob_path)
    with open(descriptor_path, "w") as fh:
        fh.write("n=%d\nd=%d\ndtype=f32\nblob=%s\n" % (data.shape[0], data.shape[1], blob_name))


def load_raw(descriptor_path: str) -> np.ndarray:
    fields = {}
    with open(descriptor_path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError("%s: malformed descriptor line %r" % (descriptor_path, line))
            key, _, val = line.partition("=")
            fields[key.strip()] = val.strip()
    for key in ("n", "d", "dtype", "blob"):
        if key not in fields:
            raise FormatError("%s: descriptor missing %r" % (descriptor_path, key))
    if fields["dtype"] != "f32":
        raise FormatError("%s: unsupported dtype %r" % (descriptor_path, fields["dtype"]))
    n, d = int(fields["n"]), int(fields["d"])
    blob_path = os.path.join(os.path.dirname(descriptor_path) or ".", fields["blob"])
    raw = np.fromfile(blob_path, dtype="<f4")
    if raw.size != n * d:
        raise FormatError(
            "%s: blob holds %d values, descriptor promises %d x %d" % (blob_path, raw.size, n, d)
        )
    return np.ascontiguousarray(raw.reshape(n, d), dtype=np.float32)
