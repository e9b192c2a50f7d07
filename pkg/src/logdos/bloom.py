"""Bloom filters and the two-filter rotation scheme used for GET logging.

Positions come from double hashing over a 128-bit digest: the digest is
split into two 64-bit words, each whitened with a value derived from the
filter seed, and probe ``i`` lands on ``(h1 + i * h2) mod m``. ``h2`` is
forced odd so the probe sequence does not collapse when ``m`` is even.

Every routine has a scalar form (plain ints, used per packet by the
event loop) and a batched form over ``(N, 2)`` uint64 word arrays (used
for prefill and the vectorized attack path). Both produce identical bit
positions.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def fp_probability(m: int, k: int, j: int) -> float:
    """Exact false-positive probability ``(1 - (1 - 1/m)^(k j))^k``."""
    _check_mk(m, k)
    if j < 0:
        raise ValueError(f"j must be >= 0, got {j}")
    if j == 0:
        return 0.0
    if m == 1:
        return 1.0
    # 1 - (1 - 1/m)^(kj), evaluated without cancellation for large m
    fill = -math.expm1(k * j * math.log1p(-1.0 / m))
    return fill**k


def fp_probability_approx(m: int, k: int, j: int) -> float:
    """Exponential approximation ``(1 - exp(-k j / m))^k``."""
    _check_mk(m, k)
    if j < 0:
        raise ValueError(f"j must be >= 0, got {j}")
    return (-math.expm1(-k * j / m)) ** k


def size_for(n: int, p: float, k: int) -> int:
    """Smallest bit count m whose approximate FP rate at ``n`` inserts is <= p."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must be in (0, 1), got {p}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    root = p ** (1.0 / k)
    if root >= 1.0:
        raise ValueError(f"target p={p} is unreachable with k={k}")
    return math.ceil(k * n / -math.log1p(-root))


def _check_mk(m: int, k: int) -> None:
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def digest_words(digests: Sequence[bytes] | bytes) -> np.ndarray:
    """Pack 16-byte digests into an ``(N, 2)`` big-endian-decoded uint64 array."""
    if isinstance(digests, (bytes, bytearray)):
        raw = bytes(digests)
    else:
        raw = b"".join(digests)
    if len(raw) % 16:
        raise ValueError("digests must be 16 bytes each")
    return np.frombuffer(raw, dtype=">u8").astype(np.uint64).reshape(-1, 2)


class BloomFilter:
    """Plain Bloom filter over 128-bit digests.

    ``capacity`` is the design insert count; a bare filter does not enforce
    it (see :class:`RotatingFilterPair`).
    """

    def __init__(self, m: int, k: int, capacity: int | None = None, seed: int = 0):
        _check_mk(m, k)
        self.m = int(m)
        self.k = int(k)
        self.capacity = int(capacity) if capacity is not None else None
        self.seed = int(seed) & _MASK64
        self._buf = bytearray((self.m + 7) // 8)
        self._packed = np.frombuffer(self._buf, dtype=np.uint8)
        self.inserted = 0
        self._mix1 = splitmix64(self.seed)
        self._mix2 = splitmix64(self.seed ^ 0x5851F42D4C957F2D)
        self._offsets = np.arange(self.k, dtype=np.uint64)

    @classmethod
    def for_target(cls, n: int, p: float, k: int, seed: int = 0) -> "BloomFilter":
        return cls(size_for(n, p, k), k, capacity=n, seed=seed)

    def params(self) -> dict:
        return {"m": self.m, "k": self.k, "seed": self.seed, "capacity": self.capacity}

    def positions(self, digest: bytes) -> list[int]:
        m = self.m
        h1 = (int.from_bytes(digest[:8], "big") ^ self._mix1) % m
        h2 = ((int.from_bytes(digest[8:16], "big") ^ self._mix2) | 1) % m
        return [(h1 + i * h2) % m for i in range(self.k)]

    def positions_many(self, words: np.ndarray) -> np.ndarray:
        """Probe positions for a word array; returns shape ``(N, k)``."""
        m = np.uint64(self.m)
        h1 = (words[:, 0] ^ np.uint64(self._mix1)) % m
        h2 = ((words[:, 1] ^ np.uint64(self._mix2)) | np.uint64(1)) % m
        return (h1[:, None] + self._offsets[None, :] * h2[:, None]) % m

    @property
    def bits(self) -> np.ndarray:
        """Unpacked copy of the bit vector (bit ``i`` at index ``i``)."""
        return np.unpackbits(self._packed, bitorder="little")[: self.m].astype(bool)

    def packed(self) -> bytes:
        return bytes(self._buf)

    def insert(self, digest: bytes) -> None:
        buf = self._buf
        for pos in self.positions(digest):
            buf[pos >> 3] |= 1 << (pos & 7)
        self.inserted += 1

    def query(self, digest: bytes) -> bool:
        buf = self._buf
        for pos in self.positions(digest):
            if not (buf[pos >> 3] >> (pos & 7)) & 1:
                return False
        return True

    __contains__ = query

    def insert_many(self, words: np.ndarray) -> None:
        if len(words) == 0:
            return
        pos = self.positions_many(words).ravel()
        np.bitwise_or.at(self._packed, pos >> np.uint64(3), np.left_shift(1, pos & np.uint64(7)).astype(np.uint8))
        self.inserted += len(words)

    def query_many(self, words: np.ndarray) -> np.ndarray:
        if len(words) == 0:
            return np.zeros(0, dtype=bool)
        pos = self.positions_many(words)
        hit = (self._packed[pos >> np.uint64(3)] >> (pos & np.uint64(7)).astype(np.uint8)) & 1
        return hit.all(axis=1)

    def reset(self) -> None:
        self._packed[:] = 0
        self.inserted = 0

    def fill_ratio(self) -> float:
        return int(np.unpackbits(self._packed).sum()) / self.m

    def expected_fp(self) -> float:
        return fp_probability(self.m, self.k, self.inserted)


class RotatingFilterPair:
    """Two filters; inserts go to the active one, queries consult both.

    When the active filter reaches capacity the other filter is cleared and
    becomes active, so the last ``capacity`` inserts are always retained.
    """

    def __init__(self, m: int, k: int, capacity: int, seed: int = 0):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.filters = (
            BloomFilter(m, k, capacity, seed=seed),
            BloomFilter(m, k, capacity, seed=seed),
        )
        self.active = 0

    @classmethod
    def for_target(cls, n: int, p: float, k: int, seed: int = 0) -> "RotatingFilterPair":
        return cls(size_for(n, p, k), k, n, seed=seed)

    @property
    def m(self) -> int:
        return self.filters[0].m

    @property
    def k(self) -> int:
        return self.filters[0].k

    @property
    def storage_bits(self) -> int:
        return 2 * self.m

    def params(self) -> dict:
        return {"m": self.m, "k": self.k, "seed": self.filters[0].seed, "capacity": self.capacity}

    def _rotate_if_full(self) -> None:
        if self.filters[self.active].inserted >= self.capacity:
            other = 1 - self.active
            self.filters[other].reset()
            self.active = other

    def insert(self, digest: bytes) -> None:
        self.filters[self.active].insert(digest)
        self._rotate_if_full()

    def query(self, digest: bytes) -> bool:
        return self.filters[0].query(digest) or self.filters[1].query(digest)

    __contains__ = query

    def insert_many(self, words: np.ndarray) -> None:
        start = 0
        while start < len(words):
            f = self.filters[self.active]
            room = self.capacity - f.inserted
            chunk = words[start : start + room]
            f.insert_many(chunk)
            start += len(chunk)
            self._rotate_if_full()

    def query_many(self, words: np.ndarray) -> np.ndarray:
        return self.filters[0].query_many(words) | self.filters[1].query_many(words)

    def reset(self) -> None:
        for f in self.filters:
            f.reset()
        self.active = 0


def random_words(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` uniformly random 128-bit digests as a word array."""
    return rng.integers(0, 2**64, size=(n, 2), dtype=np.uint64, endpoint=False)


def words_to_digests(words: np.ndarray) -> list[bytes]:
    raw = words.astype(">u8").tobytes()
    return [raw[i : i + 16] for i in range(0, len(raw), 16)]


def insert_all(target: BloomFilter | RotatingFilterPair, digests: Iterable[bytes]) -> None:
    for d in digests:
        target.insert(d)
