"""Multi-rate refresh controller: retention bins in Bloom filters.

Rows whose profiled retention falls below the last threshold are inserted
into exactly one filter; everything else lives in the implicit default bin
at the longest interval.  Queries walk the filters shortest-interval
first, so a false positive can only demote a row to a faster refresh rate,
never a slower one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .bloom import BloomFilter, BloomParams, plan_params
from .profiler import RetentionProfile
from .retention import DeviceConfig


class UnbinnableRowError(RuntimeError):
    """A row's profiled retention is below the base interval: no bin can protect it."""

    def __init__(self, row: int, measured_ms: float, base_interval_ms: float, count: int):
        self.row = row
        self.measured_ms = measured_ms
        self.base_interval_ms = base_interval_ms
        self.count = count
        super().__init__(
            f"{count} row(s) with profiled retention under the {base_interval_ms} ms base "
            f"interval (first: row {row} at {measured_ms} ms) cannot be refreshed fast enough"
        )


@dataclass(frozen=True)
class BinConfig:
    """Retention thresholds and the base refresh interval.

    Bin i covers [thresholds[i-1], thresholds[i]) with refresh interval
    equal to the lower edge (the base interval for bin 0).  Rows at or
    above the last threshold take the default interval, which equals that
    threshold.  Every interval must be an integer multiple of the base so
    the modular schedule stays exact.
    """

    thresholds_ms: tuple[float, ...] = (128.0, 256.0)
    base_interval_ms: float = 64.0

    def __post_init__(self):
        object.__setattr__(self, "thresholds_ms", tuple(float(t) for t in self.thresholds_ms))
        if self.base_interval_ms <= 0:
            raise ValueError("base_interval_ms must be positive")
        prev = 0.0
        for t in self.thresholds_ms:
            if t <= prev:
                raise ValueError(f"thresholds_ms must be strictly increasing, got {self.thresholds_ms}")
            prev = t
        for iv in self.all_intervals_ms:
            ratio = iv / self.base_interval_ms
            if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
                raise ValueError(
                    f"interval {iv} ms is not a positive integer multiple of base {self.base_interval_ms} ms"
                )

    @property
    def num_filter_bins(self) -> int:
        return len(self.thresholds_ms)

    @property
    def default_interval_ms(self) -> float:
        return self.thresholds_ms[-1] if self.thresholds_ms else self.base_interval_ms

    @property
    def all_intervals_ms(self) -> tuple[float, ...]:
        """Refresh interval per bin, default bin last."""
        if not self.thresholds_ms:
            return (self.base_interval_ms,)
        per_bin = (self.base_interval_ms,) + self.thresholds_ms[:-1]
        return per_bin + (self.thresholds_ms[-1],)

    @property
    def multipliers(self) -> tuple[int, ...]:
        return tuple(int(round(iv / self.base_interval_ms)) for iv in self.all_intervals_ms)

    def classify(self, measured_ms):
        """Bin index per retention value; the default bin is index num_filter_bins.

        Values below the base interval clamp into bin 0; builders that must
        reject such rows check for them separately.
        """
        arr = np.asarray(measured_ms, dtype=np.float64)
        idx = np.searchsorted(np.asarray(self.thresholds_ms), arr, side="right")
        if np.isscalar(measured_ms):
            return int(idx)
        return idx


@dataclass
class BinSet:
    """One Bloom filter per non-default bin, shortest interval first."""

    bin_cfg: BinConfig
    filters: list[BloomFilter]
    counts: tuple[int, ...] = field(default=())  # rows inserted per bin, default bin last

    @property
    def intervals_ms(self) -> tuple[float, ...]:
        return self.bin_cfg.all_intervals_ms

    @property
    def multipliers(self) -> tuple[int, ...]:
        return self.bin_cfg.multipliers

    @property
    def default_bin(self) -> int:
        return len(self.filters)

    @property
    def total_filter_bits(self) -> int:
        return sum(f.params.m for f in self.filters)

    def query(self, row: int) -> int:
        """First filter claiming the row, shortest interval first; default if none."""
        for b, filt in enumerate(self.filters):
            if filt.contains(row):
                return b
        return self.default_bin

    def query_many(self, rows: np.ndarray) -> np.ndarray:
        rows = np.ascontiguousarray(rows, dtype=np.uint64)
        out = np.full(rows.shape, self.default_bin, dtype=np.int64)
        for b in range(len(self.filters) - 1, -1, -1):
            out[self.filters[b].contains_many(rows)] = b
        return out


def build_bins(
    profile: RetentionProfile,
    bin_cfg: BinConfig,
    bloom_budget: float | BloomParams | Sequence[BloomParams] = 1e-3,
    seed: int = 0,
) -> BinSet:
    """Insert each row into the filter of the bin holding its profiled retention.

    bloom_budget is either a per-bin target false-positive rate (filters are
    sized for the actual bin populations) or explicit BloomParams (one for
    all bins, or a sequence with one per bin).
    """
    measured = profile.measured_retention_ms
    below = measured < bin_cfg.base_interval_ms
    if np.any(below):
        first = int(np.argmax(below))
        raise UnbinnableRowError(
            row=first,
            measured_ms=float(measured[first]),
            base_interval_ms=bin_cfg.base_interval_ms,
            count=int(np.count_nonzero(below)),
        )
    idx = bin_cfg.classify(measured)
    nbins = bin_cfg.num_filter_bins
    counts = np.bincount(idx, minlength=nbins + 1)

    filters = []
    for b in range(nbins):
        if isinstance(bloom_budget, BloomParams):
            params = bloom_budget
        elif isinstance(bloom_budget, (int, float)):
            params = plan_params(
                float(bloom_budget),
                max(1, int(counts[b])),
                seed=rng.hash_words(seed, rng.TAG_FILTER_SEED, b),
            )
        else:
            params = bloom_budget[b]
        filt = BloomFilter(params)
        filt.insert_many(np.flatnonzero(idx == b).astype(np.uint64))
        filters.append(filt)
    return BinSet(bin_cfg=bin_cfg, filters=filters, counts=tuple(int(c) for c in counts))


@dataclass
class RefreshSchedule:
    """Period counter plus per-bin interval multipliers (default bin last)."""

    multipliers: tuple[int, ...]
    period_counter: int = 0

    def __post_init__(self):
        if not self.multipliers or any(m < 1 for m in self.multipliers):
            raise ValueError("multipliers must be positive integers")
        if self.period_counter < 0:
            raise ValueError("period_counter must be non-negative")

    @classmethod
    def for_bins(cls, bins: BinSet) -> "RefreshSchedule":
        return cls(multipliers=bins.multipliers)

    def advance(self) -> None:
        self.period_counter += 1


def should_refresh(bins: BinSet, sched: RefreshSchedule, row: int) -> bool:
    """Refresh `row` this window iff the counter hits its bin's multiplier."""
    mult = sched.multipliers[bins.query(row)]
    return sched.period_counter % mult == 0


def refreshes_in_horizon(horizon_windows: int, multiplier):
    """Number of windows w in [0, horizon) with w % multiplier == 0 (ceil division)."""
    return -(-horizon_windows // multiplier)


def savings_fraction(bins: BinSet, device: DeviceConfig, horizon_windows: int) -> float:
    """Fraction of baseline refreshes eliminated, counting false-positive extras."""
    max_mult = max(bins.multipliers)
    if horizon_windows < 1 or horizon_windows % max_mult:
        raise ValueError(
            f"horizon_windows must be a positive multiple of the max multiplier {max_mult}"
        )
    rows = np.arange(device.num_rows, dtype=np.uint64)
    mult = np.asarray(bins.multipliers, dtype=np.int64)[bins.query_many(rows)]
    issued = int(refreshes_in_horizon(horizon_windows, mult).sum())
    baseline = device.num_rows * horizon_windows
    return 1.0 - issued / baseline


def measured_filter_fprs(bins: BinSet, profile: RetentionProfile) -> list[float]:
    """Empirical per-filter FPR measured over the rows not inserted in each filter."""
    idx = bins.bin_cfg.classify(profile.measured_retention_ms)
    rows = np.arange(profile.num_rows, dtype=np.uint64)
    out = []
    for b, filt in enumerate(bins.filters):
        others = rows[idx != b]
        if others.size == 0:
            out.append(0.0)
            continue
        out.append(float(filt.contains_many(others).mean()))
    return out
