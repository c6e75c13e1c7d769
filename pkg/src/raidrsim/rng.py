"""Counter-based deterministic random streams.

Every draw is a pure function of (seed, purpose tag, coordinates), so values
are reproducible across runs and platforms and do not depend on the order in
which rows are visited.  The mixer is the splitmix64 finalizer; scalar and
vectorized paths produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB

_V_GAMMA = np.uint64(_GAMMA)
_V_MUL1 = np.uint64(_MUL1)
_V_MUL2 = np.uint64(_MUL2)

# Purpose tags keep the per-row streams for different quantities independent.
TAG_WEAK_SELECT = 0x01
TAG_BASE_RETENTION = 0x02
TAG_VRT_FLAG = 0x04
TAG_VRT_STEP = 0x05
TAG_DPD_PATTERN = 0x06
TAG_PROFILE_VRT_STEP = 0x07
TAG_PROFILE_PATTERNS = 0x08
TAG_PROFILER_SEED = 0x09
TAG_FILTER_SEED = 0x0A
TAG_SWEEP_POINT = 0x0B
TAG_FPR_PROBE = 0x0C


def mix64(x: int) -> int:
    """splitmix64 finalizer of a 64-bit word."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * _MUL1) & _MASK
    x = ((x ^ (x >> 27)) * _MUL2) & _MASK
    return x ^ (x >> 31)


def hash_words(*words: int) -> int:
    """Fold a tuple of integers into one 64-bit hash (order-sensitive)."""
    h = 0
    for w in words:
        h = mix64((h + _GAMMA + (int(w) & _MASK)) & _MASK)
    return h


def _mix64_vec(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> np.uint64(30))) * _V_MUL1
    x = (x ^ (x >> np.uint64(27))) * _V_MUL2
    return x ^ (x >> np.uint64(31))


def hash_words_vec(*words) -> np.ndarray:
    """Vectorized hash_words; any word may be a numpy array of uint64.

    Scalar words are folded with the same lattice as hash_words, so a call
    mixing scalars and arrays agrees element-wise with the scalar path.
    Arithmetic intentionally wraps mod 2**64.
    """
    h = np.asarray(np.uint64(0))
    with np.errstate(over="ignore"):
        for w in words:
            if isinstance(w, np.ndarray):
                w64 = w if w.dtype == np.uint64 else w.astype(np.uint64)
            else:
                w64 = np.uint64(int(w) & _MASK)
            h = _mix64_vec(np.asarray(h + _V_GAMMA + w64))
    return h


def uniform01(*words: int) -> float:
    """Deterministic uniform in [0, 1) keyed by the given words."""
    return (hash_words(*words) >> 11) * 2.0**-53


def uniform01_vec(*words) -> np.ndarray:
    h = hash_words_vec(*words)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def integer_below(n: int, *words: int) -> int:
    """Deterministic integer in [0, n). Modulo bias is negligible for n << 2**64."""
    return hash_words(*words) % n


def integer_below_vec(n: int, *words) -> np.ndarray:
    return hash_words_vec(*words) % np.uint64(n)


def standard_normal_vec(*words) -> np.ndarray:
    """Box-Muller normal deviates from two derived uniform streams."""
    u1 = uniform01_vec(*words, 1)
    u2 = uniform01_vec(*words, 2)
    # 1 - u1 lies in (0, 1], keeping the log finite
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
