"""Systematic MDS erasure code over GF(2^8).

The generator is ``V @ inv(V[:k])`` for an ``n x k`` Vandermonde matrix ``V``
on the distinct points ``0..n-1``.  Any ``k`` rows of ``V`` are invertible,
and right-multiplying by an invertible matrix keeps that property, so any
``k`` coded blocks recover the data.
"""

from dataclasses import dataclass, field

import numpy as np

PRIMITIVE_POLY = 0x11D
FIELD_ORDER = 256


class UnrecoverableError(ValueError):
    pass


def _tables():
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    exp[255:510] = exp[:255]
    mul = exp[(log[:, None] + log[None, :]) % 255].astype(np.uint8)
    mul[0, :] = 0
    mul[:, 0] = 0
    inv = np.zeros(256, dtype=np.uint8)
    inv[1:] = exp[(255 - log[1:]) % 255]
    return exp, log, mul, inv


EXP, LOG, MUL, INV = _tables()


def gf_matmul(A, B):
    """Matrix product over GF(256); ``B`` may be a byte payload matrix."""
    A = np.asarray(A, dtype=np.uint8)
    B = np.asarray(B, dtype=np.uint8)
    out = np.zeros((A.shape[0], B.shape[1]), dtype=np.uint8)
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            if A[i, j]:
                out[i] ^= MUL[A[i, j]][B[j]]
    return out


def gf_inv(A):
    """Inverse of a square matrix over GF(256) by Gauss-Jordan elimination."""
    A = np.array(A, dtype=np.uint8)
    n = A.shape[0]
    aug = np.concatenate([A, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivots = np.nonzero(aug[col:, col])[0]
        if pivots.size == 0:
            raise np.linalg.LinAlgError("singular matrix over GF(256)")
        p = col + pivots[0]
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        aug[col] = MUL[INV[aug[col, col]]][aug[col]]
        for r in range(n):
            if r != col and aug[r, col]:
                aug[r] ^= MUL[aug[r, col]][aug[col]]
    return aug[:, n:]


def _vandermonde(n, k):
    V = np.zeros((n, k), dtype=np.uint8)
    for i in range(n):
        v = 1
        for j in range(k):
            V[i, j] = v
            v = MUL[v, i]
    return V


@dataclass(frozen=True)
class MDSCode:
    n_total: int
    k_data: int
    generator: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 1 <= self.k_data <= self.n_total:
            raise ValueError("need 1 <= k_data <= n_total")
        if self.n_total > FIELD_ORDER - 1:
            raise ValueError(f"GF(256) supports at most {FIELD_ORDER - 1} coded blocks")
        V = _vandermonde(self.n_total, self.k_data)
        G = gf_matmul(V, gf_inv(V[: self.k_data]))
        object.__setattr__(self, "generator", G)


def mds_encode(data_blocks, code):
    """Encode ``k_data`` equal-length byte blocks into ``n_total`` blocks; the first ``k_data`` are the data."""
    data = np.asarray([np.frombuffer(bytes(b), dtype=np.uint8) for b in data_blocks])
    if data.shape[0] != code.k_data:
        raise ValueError(f"expected {code.k_data} data blocks, got {data.shape[0]}")
    coded = gf_matmul(code.generator[code.k_data :], data)
    return [bytes(b) for b in data] + [bytes(b) for b in coded]


def mds_decode(blocks, code):
    """Recover the data blocks from a mapping ``{block index: bytes}``."""
    if len(blocks) < code.k_data:
        raise UnrecoverableError(f"need {code.k_data} blocks, got {len(blocks)}")
    idx = sorted(blocks)[: code.k_data]
    if any(not 0 <= i < code.n_total for i in idx):
        raise ValueError("block index out of range")
    if idx == list(range(code.k_data)):
        return [bytes(blocks[i]) for i in idx]
    rows = np.asarray([np.frombuffer(bytes(blocks[i]), dtype=np.uint8) for i in idx])
    data = gf_matmul(gf_inv(code.generator[idx]), rows)
    return [bytes(b) for b in data]
