"""Trainable binary hasher: one tanh encoding layer with a code-threshold
bias, trained by plain gradient descent on a three-term objective:

* similarity-weighted code disagreement (nearby inputs should share codes),
* a quantization pull toward ±1,
* bit decorrelation (code dimensions should not collapse together).

Pair similarity is ``S_ij = exp(-||x_i - x_j||^2 / sigma^2)`` with sigma
set to the median pairwise distance of a bounded sample.  ``sign(0)``
counts as +1 everywhere so codes are total functions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class TrainingError(RuntimeError):
    """Training diverged (non-finite loss)."""


MAGIC = b"CNDH"


@dataclass(slots=True)
class HasherTrainingParams:
    epochs: int = 80
    learning_rate: float = 0.002
    minibatch: int = 128
    sigma_sample: int = 1000  # rows sampled for the sigma estimate
    lambda_q: float = 0.1
    lambda_d: float = 0.1
    seed: int = 0


@dataclass(slots=True)
class LearnedHasher:
    """Trained weights; inference is pure and deterministic."""

    W: np.ndarray  # (d, b)
    b_enc: np.ndarray  # (b,)
    decoder: np.ndarray  # (b, d), reconstruction map fit after training
    b_code: np.ndarray  # (b,), code threshold
    history: list[float] = field(default_factory=list)  # loss per epoch

    @property
    def dim(self) -> int:
        return self.W.shape[0]

    @property
    def bits(self) -> int:
        return self.W.shape[1]

    def activations(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.tanh(X @ self.W + self.b_enc)

    def codes(self, X: np.ndarray) -> np.ndarray:
        """±1 codes: sign(tanh(Wx + b_enc) - b_code), sign(0) = +1."""
        act = self.activations(np.atleast_2d(X)) - self.b_code
        return np.where(act >= 0.0, 1, -1).astype(np.int8)

    def code_ints(self, X: np.ndarray) -> np.ndarray:
        """Codes packed into unsigned integers (bit i set iff code_i = +1)."""
        bits = self.codes(X) > 0
        weights = (np.uint64(1) << np.arange(self.bits, dtype=np.uint64))
        return (bits.astype(np.uint64) * weights).sum(axis=1)


def hash_loss_and_grads(W, b_enc, X, S, lam_q, lam_d):
    """Loss and analytic gradients w.r.t. W and b_enc.

    ``y_i = tanh(x_i W + b_enc)``;
    ``L = sum_ij S_ij ||y_i - y_j||^2 + lam_q sum_i ||y_i - sign(y_i)||^2
    + lam_d ||Y'Y/m - I||_F^2``.  The sign targets are held fixed
    (subgradient), matching what finite differences see away from zero
    crossings.
    """
    X = np.asarray(X, dtype=np.float64)
    m, b = X.shape[0], W.shape[1]
    Z = X @ W + b_enc
    Y = np.tanh(Z)
    sgn = np.where(Y >= 0.0, 1.0, -1.0)

    diff_sq = ((Y[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
    l1 = float((S * diff_sq).sum())
    l2 = lam_q * float(((Y - sgn) ** 2).sum())
    A = Y.T @ Y / m - np.eye(b)
    l3 = lam_d * float((A**2).sum())

    D = np.diag(S.sum(axis=1))
    gY = 4.0 * (D - S) @ Y + 2.0 * lam_q * (Y - sgn) + (4.0 * lam_d / m) * (Y @ A)
    gZ = gY * (1.0 - Y**2)
    return l1 + l2 + l3, X.T @ gZ, gZ.sum(axis=0)


def pair_similarities(X: np.ndarray, sigma: float) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    return np.exp(-sq / (sigma * sigma))


def estimate_sigma(X: np.ndarray, limit: int, rng: np.random.Generator) -> float:
    """Median pairwise distance over a sample of at most ``limit`` rows."""
    n = X.shape[0]
    take = min(n, limit)
    idx = rng.choice(n, size=take, replace=False)
    S = np.asarray(X[idx], dtype=np.float64)
    sq = ((S[:, None, :] - S[None, :, :]) ** 2).sum(-1)
    iu = np.triu_indices(take, k=1)
    med = float(np.median(np.sqrt(sq[iu]))) if iu[0].size else 0.0
    return med if med > 0.0 else 1.0


def train_hasher(rows: np.ndarray, num_bits: int, params: HasherTrainingParams) -> LearnedHasher:
    """Gradient-descent training; raises TrainingError on divergence."""
    X = np.asarray(rows, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ValueError("training a hasher needs at least 2 rows")
    rng = np.random.default_rng(params.seed)
    sigma = estimate_sigma(X, params.sigma_sample, rng)

    W = rng.standard_normal((d, num_bits)) / np.sqrt(d)
    b_enc = np.zeros(num_bits)
    history = []
    for epoch in range(params.epochs):
        take = min(n, params.minibatch)
        idx = rng.choice(n, size=take, replace=False)
        Xb = X[idx]
        S = pair_similarities(Xb, sigma)
        loss, gW, gb = hash_loss_and_grads(W, b_enc, Xb, S, params.lambda_q, params.lambda_d)
        if not np.isfinite(loss):
            raise TrainingError("non-finite loss %r at epoch %d" % (loss, epoch))
        W -= params.learning_rate * gW
        b_enc -= params.learning_rate * gb
        history.append(float(loss))

    acts = np.tanh(X @ W + b_enc)
    b_code = np.median(acts, axis=0)  # balances each bit over the training set
    decoder, *_ = np.linalg.lstsq(acts, X, rcond=None)
    return LearnedHasher(W=W, b_enc=b_enc, decoder=decoder, b_code=b_code, history=history)


# ---------------------------------------------------------------------------
# flat binary serialization

def save_hasher(hasher: LearnedHasher, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<ii", hasher.dim, hasher.bits))
        for arr in (hasher.W, hasher.b_enc, hasher.decoder, hasher.b_code):
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_hasher(path: str) -> LearnedHasher:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError("%s: bad magic %r (expected %r)" % (path, blob[:4], MAGIC))
    if len(blob) < 12:
        raise ValueError("%s: truncated header" % path)
    d, b = struct.unpack_from("<ii", blob, 4)
    if d < 1 or b < 1:
        raise ValueError("%s: invalid dimensions d=%d b=%d" % (path, d, b))
    want = 12 + 4 * (d * b + b + b * d + b)
    if len(blob) != want:
        raise ValueError("%s: expected %d bytes, found %d" % (path, want, len(blob)))
    off = 12
    out = []
    for shape in ((d, b), (b,), (b, d), (b,)):
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(shape)
        out.append(arr.astype(np.float64))
        off += 4 * count
    W, b_enc, decoder, b_code = out
    return LearnedHasher(W=W, b_enc=b_enc, decoder=decoder, b_code=b_code)
