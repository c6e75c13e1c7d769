"""Bloom filters used to store retention bins, plus sizing tools.

The hash family is enhanced double hashing: position i of a key is
(g1 + i * g2 + C(i,3)) mod m, where g1 and g2 are independent 64-bit
hashes of (seed, key).  The cubic term breaks the arithmetic-progression
structure of plain double hashing, whose false-positive rate runs several
times above the analytic value for filters a few hundred bits long.  When
m is a power of two, g2 is forced odd so the probe sequence walks the
whole table; otherwise g2 is reduced mod m and bumped away from zero.
Bits live in packed 64-bit words (bit i sits in word i // 64 at position
i % 64), which is also the snapshot wire layout.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .rng import hash_words, hash_words_vec

_MASK = (1 << 64) - 1
_SNAPSHOT_MAGIC = b"RBLM1"
_SNAPSHOT_HEADER = struct.Struct("<5sQIQQ")

MAX_HASHES = 64
DEFAULT_PLAN_CEILING_BITS = 2**32


class PlanUnsatisfiableError(ValueError):
    """Raised when no filter within the bit ceiling can meet the FPR target."""


def _probe_offset(i: int) -> int:
    # C(i,3): the enhanced-double-hashing cubic term
    return (i * (i - 1) * (i - 2)) // 6


@dataclass(frozen=True)
class BloomParams:
    """Filter geometry: m bits, k hash functions, hash-family seed."""

    m: int
    k: int
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"bloom m must be >= 1, got {self.m}")
        if not 1 <= self.k <= MAX_HASHES:
            raise ValueError(f"bloom k must be in [1, {MAX_HASHES}], got {self.k}")
        if not 0 <= self.seed <= _MASK:
            raise ValueError("bloom seed must fit in 64 bits")


class BloomFilter:
    """Append-only membership filter over 64-bit keys.

    No deletion and no counting: bins are built once per profiling pass.
    After construction and inserts the filter is immutable in practice and
    may be probed concurrently.
    """

    __slots__ = ("params", "words", "n_inserted")

    def __init__(self, params: BloomParams):
        self.params = params
        self.words = np.zeros((params.m + 63) // 64, dtype=np.uint64)
        self.n_inserted = 0

    # -- hashing ---------------------------------------------------------

    def _g1g2(self, key: int) -> tuple[int, int]:
        m = self.params.m
        seed = self.params.seed
        g1 = hash_words(seed, 1, key)
        g2 = hash_words(seed, 2, key)
        if m & (m - 1) == 0:
            g2 |= 1
        else:
            g2 %= m
            if g2 == 0:
                g2 = 1
        return g1, g2

    def _positions(self, key: int):
        m = self.params.m
        g1, g2 = self._g1g2(key)
        return [
            ((g1 + i * g2 + _probe_offset(i)) & _MASK) % m for i in range(self.params.k)
        ]

    def _g1g2_vec(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        m = self.params.m
        seed = self.params.seed
        g1 = hash_words_vec(seed, 1, keys)
        g2 = hash_words_vec(seed, 2, keys)
        if m & (m - 1) == 0:
            g2 = g2 | np.uint64(1)
        else:
            g2 = g2 % np.uint64(m)
            g2[g2 == 0] = np.uint64(1)
        return g1, g2

    # -- mutation --------------------------------------------------------

    def insert(self, key: int) -> None:
        for pos in self._positions(key):
            self.words[pos >> 6] |= np.uint64(1 << (pos & 63))
        self.n_inserted += 1

    def insert_many(self, keys: np.ndarray) -> None:
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        if keys.size == 0:
            return
        g1, g2 = self._g1g2_vec(keys)
        m = np.uint64(self.params.m)
        with np.errstate(over="ignore"):
            for i in range(self.params.k):
                pos = (g1 + np.uint64(i) * g2 + np.uint64(_probe_offset(i))) % m
                np.bitwise_or.at(
                    self.words,
                    (pos >> np.uint64(6)).astype(np.int64),
                    np.uint64(1) << (pos & np.uint64(63)),
                )
        self.n_inserted += int(keys.size)

    # -- queries ---------------------------------------------------------

    def contains(self, key: int) -> bool:
        for pos in self._positions(key):
            if not (int(self.words[pos >> 6]) >> (pos & 63)) & 1:
                return False
        return True

    def contains_many(self, keys: np.ndarray) -> np.ndarray:
        keys = np.ascontiguousarray(keys, dtype=np.uint64)
        hit = np.ones(keys.shape, dtype=bool)
        if keys.size == 0:
            return hit
        g1, g2 = self._g1g2_vec(keys)
        m = np.uint64(self.params.m)
        with np.errstate(over="ignore"):
            for i in range(self.params.k):
                pos = (g1 + np.uint64(i) * g2 + np.uint64(_probe_offset(i))) % m
                word = self.words[(pos >> np.uint64(6)).astype(np.int64)]
                hit &= ((word >> (pos & np.uint64(63))) & np.uint64(1)).astype(bool)
        return hit

    @property
    def popcount(self) -> int:
        return int(np.unpackbits(self.words.view(np.uint8)).sum())

    # -- snapshot wire format ---------------------------------------------
    # magic "RBLM1", m u64 LE, k u32 LE, seed u64 LE, n_inserted u64 LE,
    # then ceil(m/64) little-endian 64-bit words.

    def to_bytes(self) -> bytes:
        header = _SNAPSHOT_HEADER.pack(
            _SNAPSHOT_MAGIC, self.params.m, self.params.k, self.params.seed, self.n_inserted
        )
        return header + self.words.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "BloomFilter":
        if len(data) < _SNAPSHOT_HEADER.size:
            raise ValueError("bloom snapshot truncated")
        magic, m, k, seed, n_inserted = _SNAPSHOT_HEADER.unpack_from(data)
        if magic != _SNAPSHOT_MAGIC:
            raise ValueError(f"bad bloom snapshot magic {magic!r}")
        expected = _SNAPSHOT_HEADER.size + 8 * ((m + 63) // 64)
        if len(data) != expected:
            raise ValueError(f"bloom snapshot length {len(data)}, expected {expected}")
        filt = cls(BloomParams(m=m, k=k, seed=seed))
        filt.words[:] = np.frombuffer(data, dtype="<u8", offset=_SNAPSHOT_HEADER.size)
        if m % 64:
            tail = int(filt.words[-1]) >> (m % 64)
            if tail:
                raise ValueError("bloom snapshot has bits set beyond m")
        filt.n_inserted = n_inserted
        return filt

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "BloomFilter":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def analytic_fpr(m: int, k: int, n: int) -> float:
    """Expected false-positive probability after n inserts: (1-(1-1/m)^(k n))^k."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 0.0
    if m == 1:
        return 1.0
    return (1.0 - math.exp(k * n * math.log1p(-1.0 / m))) ** k


def _k_for(m: int, n: int) -> int:
    # conventional rounding; round() would banker-round .5 cases
    return max(1, min(MAX_HASHES, int(math.floor(m / n * math.log(2) + 0.5))))


def plan_params(
    target_fpr: float,
    n_expected: int,
    seed: int = 0,
    ceiling_bits: int = DEFAULT_PLAN_CEILING_BITS,
) -> BloomParams:
    """Smallest m (with k = round(m/n * ln 2)) whose analytic FPR meets target_fpr.

    Starts from the closed-form optimum m = ceil(-n ln p / (ln 2)^2) and
    searches locally, since rounding k perturbs the exact boundary.
    """
    if not 0.0 < target_fpr < 1.0:
        raise ValueError("target_fpr must be in (0, 1)")
    if n_expected < 1:
        raise ValueError("n_expected must be >= 1")

    m = max(1, math.ceil(-n_expected * math.log(target_fpr) / math.log(2) ** 2))
    if analytic_fpr(m, _k_for(m, n_expected), n_expected) > target_fpr:
        # grow geometrically until feasible, then bisect back
        lo, hi = m, m
        while analytic_fpr(hi, _k_for(hi, n_expected), n_expected) > target_fpr:
            hi *= 2
            if hi > ceiling_bits:
                raise PlanUnsatisfiableError(
                    f"no filter below {ceiling_bits} bits meets fpr {target_fpr} at n={n_expected}"
                )
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if analytic_fpr(mid, _k_for(mid, n_expected), n_expected) <= target_fpr:
                hi = mid
            else:
                lo = mid
        m = hi
    # k rounding makes feasibility only near-monotone in m; finish locally
    while m > 1 and analytic_fpr(m - 1, _k_for(m - 1, n_expected), n_expected) <= target_fpr:
        m -= 1
    if m > ceiling_bits:
        raise PlanUnsatisfiableError(
            f"required {m} bits exceeds ceiling {ceiling_bits} for fpr {target_fpr}, n={n_expected}"
        )
    return BloomParams(m=m, k=_k_for(m, n_expected), seed=seed)
