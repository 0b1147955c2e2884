"""Per-layer MAN coded caching, MDS splitting across edge nodes, and the latency model.

Payloads are numpy ``uint8`` arrays holding one bit per element.  Users and
files are 0-indexed.  Subsets are ordered colexicographically everywhere so
that codewords are byte-reproducible.
"""

import struct
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .mds import MDSCode, mds_decode, mds_encode

SUBSET_ORDER_COLEX = 0
_HEADER = struct.Struct("<BHHQQB")


class MissingBlockError(ValueError):
    pass


def colex_subsets(K, size):
    return sorted(combinations(range(K), size), key=lambda s: s[::-1])


@dataclass(frozen=True)
class CachingConfig:
    """MAN parameters for one layer; ``t = K * mu``."""

    K: int
    N: int
    t: int
    diversity: int = 1

    def __post_init__(self):
        if self.K < 1 or self.N < 1:
            raise ValueError("K and N must be positive")
        if int(self.t) != self.t:
            raise ValueError(f"combinatorial placement needs integer t, got {self.t}")
        if not 0 <= self.t <= self.K:
            raise ValueError("t must lie in [0, K]")
        if self.diversity < 1:
            raise ValueError("diversity must be positive")

    @property
    def mu(self):
        return self.t / self.K

    @property
    def n_subfiles(self):
        return comb(self.K, self.t)

    def padded_length(self, layer_bits):
        unit = self.n_subfiles * self.diversity
        return -(-layer_bits // unit) * unit


@dataclass
class MulticastCodeword:
    layer: int
    K: int
    t: int
    block_bits: int
    pad_bits: int
    blocks: dict

    @property
    def total_bits(self):
        return self.block_bits * len(self.blocks)

    def payload(self):
        """All blocks concatenated in colex order."""
        if not self.blocks:
            return np.zeros(0, dtype=np.uint8)
        return np.concatenate([self.blocks[S] for S in colex_subsets(self.K, self.t + 1)])


def _subfiles(config, bits):
    padded = np.zeros(config.padded_length(bits.size), dtype=np.uint8)
    padded[: bits.size] = bits
    parts = np.split(padded, config.n_subfiles)
    return dict(zip(colex_subsets(config.K, config.t), parts))


def place(config, library):
    """Fill every user's cache for one layer.

    ``library`` has shape ``(N, layer_bits)``.  User ``k`` keeps subfile
    ``W_n^T`` of every file exactly when ``k`` is in ``T``.
    """
    library = np.asarray(library, dtype=np.uint8)
    if library.shape[0] != config.N:
        raise ValueError(f"library holds {library.shape[0]} files, config says {config.N}")
    caches = [dict() for _ in range(config.K)]
    for n, row in enumerate(library):
        for T, part in _subfiles(config, row).items():
            for k in T:
                caches[k][(n, T)] = part
    return caches


def deliver(config, library, demands, layer=1):
    """Server side: one XOR block per ``(t+1)``-subset of users."""
    library = np.asarray(library, dtype=np.uint8)
    demands = tuple(int(d) for d in demands)
    if len(demands) != config.K:
        raise ValueError("need one demand per user")
    if any(not 0 <= d < config.N for d in demands):
        raise ValueError(f"demands must lie in [0, {config.N})")
    layer_bits = library.shape[1]
    padded = config.padded_length(layer_bits)
    sub = {n: _subfiles(config, library[n]) for n in set(demands)}
    blocks = {}
    for S in colex_subsets(config.K, config.t + 1):
        acc = np.zeros(padded // config.n_subfiles, dtype=np.uint8)
        for k in S:
            rest = tuple(j for j in S if j != k)
            acc ^= sub[demands[k]][rest]
        blocks[S] = acc
    return MulticastCodeword(layer, config.K, config.t, padded // config.n_subfiles, padded - layer_bits, blocks)


def decode_user(k, cache, codeword, demands):
    """Reconstruct user ``k``'s demanded layer from its cache and the multicast blocks."""
    K, t = codeword.K, codeword.t
    want = int(demands[k])
    parts = []
    for T in colex_subsets(K, t):
        if k in T:
            parts.append(cache[(want, T)])
            continue
        S = tuple(sorted(T + (k,)))
        if S not in codeword.blocks:
            raise MissingBlockError(f"codeword lacks block {S}")
        acc = codeword.blocks[S].copy()
        for j in S:
            if j != k:
                acc ^= cache[(int(demands[j]), tuple(i for i in S if i != j))]
        parts.append(acc)
    bits = np.concatenate(parts)
    return bits[: bits.size - codeword.pad_bits]


def codeword_length(F, Rs, K, mu):
    """Bits sent for one layer, ``F Rs K (1 - mu) / (1 + K mu)``; real ``mu`` means memory sharing.

    Exact when called with ``fractions.Fraction`` arguments."""
    if not 0 <= mu <= 1:
        raise ValueError("mu must lie in [0, 1]")
    if K < 1:
        raise ValueError("K must be positive")
    return F * Rs * K * (1 - mu) / (1 + K * mu)


def delivery_latency(layers, params):
    """Seconds to deliver every layer at its channel rate, sum_i L(X_i) / (w R^C_i L_i)."""
    if not params.bandwidth_hz > 0:
        raise ValueError("bandwidth must be positive")
    total = 0.0
    for layer in layers:
        if not layer.channel_rate > 0 or layer.diversity < 1:
            raise ValueError("channel rates and diversity orders must be positive")
        bits = codeword_length(params.file_samples, layer.source_rate, params.K, layer.cache_fraction)
        total += bits / (params.bandwidth_hz * layer.channel_rate * layer.diversity)
    return total


def split_for_ens(codeword, L, n_ens):
    """MDS-encode a codeword into ``n_ens`` byte blocks, any ``L`` of which suffice.

    Block ``j`` is sent by edge node ``j``.
    """
    bits = codeword.payload()
    if bits.size % (8 * L):
        bits = np.concatenate([bits, np.zeros(8 * L - bits.size % (8 * L), dtype=np.uint8)])
    chunks = np.split(np.packbits(bits), L)
    return mds_encode([c.tobytes() for c in chunks], MDSCode(n_ens, L))


def join_from_ens(received, codeword_meta, L, n_ens):
    """Rebuild the multicast blocks from any ``L`` of the edge-node blocks."""
    data = mds_decode(received, MDSCode(n_ens, L))
    bits = np.unpackbits(np.frombuffer(b"".join(data), dtype=np.uint8))
    n_blocks = comb(codeword_meta.K, codeword_meta.t + 1)
    bits = bits[: n_blocks * codeword_meta.block_bits]
    parts = np.split(bits, n_blocks) if n_blocks else []
    blocks = dict(zip(colex_subsets(codeword_meta.K, codeword_meta.t + 1), parts))
    return MulticastCodeword(
        codeword_meta.layer, codeword_meta.K, codeword_meta.t, codeword_meta.block_bits, codeword_meta.pad_bits, blocks
    )


def serialize_codeword(codeword):
    """Little-endian header then the packed blocks in colex order.

    Header: layer u8, K u16, t u16, block_bits u64, pad_bits u64, subset
    order u8 (0 = colex).  Each block is packed MSB-first and padded to a
    whole byte.
    """
    out = [
        _HEADER.pack(
            codeword.layer, codeword.K, codeword.t, codeword.block_bits, codeword.pad_bits, SUBSET_ORDER_COLEX
        )
    ]
    for S in colex_subsets(codeword.K, codeword.t + 1):
        out.append(np.packbits(codeword.blocks[S]).tobytes())
    return b"".join(out)


def deserialize_codeword(data):
    layer, K, t, block_bits, pad_bits, order = _HEADER.unpack_from(data)
    if order != SUBSET_ORDER_COLEX:
        raise ValueError(f"unknown subset order code {order}")
    step = -(-block_bits // 8)
    offset = _HEADER.size
    blocks = {}
    for S in colex_subsets(K, t + 1):
        chunk = np.frombuffer(data, dtype=np.uint8, count=step, offset=offset)
        blocks[S] = np.unpackbits(chunk)[:block_bits]
        offset += step
    if offset != len(data):
        raise ValueError("trailing bytes after codeword blocks")
    return MulticastCodeword(layer, K, t, block_bits, pad_bits, blocks)
