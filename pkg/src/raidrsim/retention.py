"""Ground-truth model of per-row retention behavior.

Rows carry a base retention time drawn from a configurable tail
distribution, an optional worst-case data-pattern multiplier, and an
optional two-state retention toggle stepped once per refresh window.
Retention is modeled per row (the minimum over its cells); the binning
controller never needs finer grain.

All sampling goes through counter-based streams keyed by
(seed, purpose, row [, window]), so regeneration is order-independent and
bit-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng

DEFAULT_TRFC_TABLE_NS = {1.0: 110.0, 2.0: 160.0, 4.0: 260.0, 8.0: 350.0}

DIST_TWO_POPULATION = "two-population"
DIST_LOGNORMAL_TAIL = "lognormal-tail"


def _default_trfc_table() -> dict[float, float]:
    return dict(DEFAULT_TRFC_TABLE_NS)


@dataclass(frozen=True)
class DeviceConfig:
    """Chip geometry and refresh timing.

    trfc_table_ns maps density in Gbit to the per-command refresh latency;
    banks is carried for reporting only (per-bank scheduling is out of scope).
    """

    density_bits: int = 8_192_000_000
    row_size_bits: int = 8192
    trefw_ms: float = 64.0
    refresh_cmds_per_window: int = 8192
    banks: int = 8
    trfc_table_ns: dict[float, float] = field(default_factory=_default_trfc_table)

    def __post_init__(self):
        if self.density_bits < 1 or self.row_size_bits < 1:
            raise ValueError("density_bits and row_size_bits must be positive")
        if self.density_bits % self.row_size_bits:
            raise ValueError(
                f"density_bits {self.density_bits} not divisible by row_size_bits {self.row_size_bits}"
            )
        if self.trefw_ms <= 0:
            raise ValueError("trefw_ms must be positive")
        if self.refresh_cmds_per_window < 1 or self.banks < 1:
            raise ValueError("refresh_cmds_per_window and banks must be positive")
        if not self.trfc_table_ns:
            raise ValueError("trfc_table_ns must not be empty")
        last = 0.0
        for d in sorted(self.trfc_table_ns):
            v = self.trfc_table_ns[d]
            if d <= 0 or v <= 0:
                raise ValueError("trfc_table_ns entries must be positive")
            if v < last:
                raise ValueError("trfc_table_ns must be non-decreasing in density")
            last = v

    @property
    def num_rows(self) -> int:
        return self.density_bits // self.row_size_bits

    @property
    def density_gbit(self) -> float:
        return self.density_bits / 2**30

    @classmethod
    def from_rows(cls, num_rows: int, row_size_bits: int = 8192, **kw) -> "DeviceConfig":
        return cls(density_bits=num_rows * row_size_bits, row_size_bits=row_size_bits, **kw)


@dataclass(frozen=True)
class RetentionDistribution:
    """Tail distribution of per-row base retention.

    A weak_fraction of rows draws from a law supported on
    [floor_ms, weak_high_ms); the rest sit at strong_value_ms.  The
    lognormal-tail kind clips the lognormal draw into the same support.
    """

    kind: str = DIST_TWO_POPULATION
    weak_fraction: float = 1e-3
    floor_ms: float = 64.0
    weak_high_ms: float = 256.0
    strong_value_ms: float = 2560.0
    lognormal_median_ms: float = 110.0
    lognormal_sigma: float = 0.4

    def __post_init__(self):
        if self.kind not in (DIST_TWO_POPULATION, DIST_LOGNORMAL_TAIL):
            raise ValueError(f"unknown retention distribution kind {self.kind!r}")
        if not 0.0 <= self.weak_fraction <= 1.0:
            raise ValueError("weak_fraction must be in [0, 1]")
        if self.floor_ms <= 0:
            raise ValueError("floor_ms must be positive")
        if self.weak_high_ms <= self.floor_ms:
            raise ValueError("weak_high_ms must exceed floor_ms")
        if self.strong_value_ms < self.weak_high_ms:
            raise ValueError("strong_value_ms must be >= weak_high_ms")
        if self.lognormal_median_ms <= 0 or self.lognormal_sigma <= 0:
            raise ValueError("lognormal parameters must be positive")


@dataclass(frozen=True)
class VrtModel:
    """Two-state retention toggle, stepped once per refresh window."""

    enabled: bool = False
    affected_fraction: float = 0.01
    low_factor: float = 0.5
    p_high_to_low: float = 0.1
    p_low_to_high: float = 0.1

    def __post_init__(self):
        for name in ("affected_fraction", "p_high_to_low", "p_low_to_high"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not 0.0 < self.low_factor <= 1.0:
            raise ValueError("low_factor must be in (0, 1]")


@dataclass(frozen=True)
class DpdModel:
    """Worst-case data-pattern multiplier; one worst pattern per row."""

    enabled: bool = False
    num_patterns: int = 8
    worst_pattern_factor: float = 0.5

    def __post_init__(self):
        if self.num_patterns < 1:
            raise ValueError("num_patterns must be >= 1")
        if not 0.0 < self.worst_pattern_factor <= 1.0:
            raise ValueError("worst_pattern_factor must be in (0, 1]")


class RetentionGroundTruth:
    """Per-row true retention state, regenerable from config + seed.

    Mutable only through step_vrt; generation may be sharded across row
    ranges because every stream is keyed by row index.
    """

    def __init__(self, device, dist, vrt, dpd, seed, base_retention_ms, dpd_worst_pattern, has_vrt):
        self.device = device
        self.dist = dist
        self.vrt = vrt
        self.dpd = dpd
        self.seed = seed
        self.base_retention_ms = base_retention_ms
        self.dpd_worst_pattern = dpd_worst_pattern
        self.has_vrt = has_vrt
        self.vrt_low = np.zeros(device.num_rows, dtype=bool)
        self.current_window = 0
        self._vrt_rows = np.flatnonzero(has_vrt).astype(np.uint64)

    @property
    def num_rows(self) -> int:
        return self.device.num_rows

    def _dpd_factor(self) -> float:
        return self.dpd.worst_pattern_factor if self.dpd.enabled else 1.0

    def step_vrt(self, window: int) -> "RetentionGroundTruth":
        """Advance the retention toggle of affected rows into `window`.

        Must be called once per window in increasing order.
        """
        if window != self.current_window + 1:
            raise ValueError(
                f"step_vrt windows must be consecutive; at {self.current_window}, got {window}"
            )
        idx = self._vrt_rows
        if idx.size:
            u = rng.uniform01_vec(self.seed, rng.TAG_VRT_STEP, idx, window)
            low = self.vrt_low[idx]
            self.vrt_low[idx] = np.where(low, u >= self.vrt.p_low_to_high, u < self.vrt.p_high_to_low)
        self.current_window = window
        return self

    def true_min_retention(self, row: int, window: int) -> float:
        """Worst-case retention of `row` during `window` (ms)."""
        if not 0 <= row < self.num_rows:
            raise IndexError(f"row {row} out of range [0, {self.num_rows})")
        if window != self.current_window:
            raise ValueError(
                f"ground truth is at window {self.current_window}, not {window}; call step_vrt in order"
            )
        factor = self._dpd_factor()
        if self.vrt_low[row]:
            factor *= self.vrt.low_factor
        return float(self.base_retention_ms[row]) * factor

    def retention_now(self, rows: np.ndarray | None = None) -> np.ndarray:
        """Vector of current-window worst-case retentions (internal fast path)."""
        if rows is None:
            base = self.base_retention_ms
            low = self.vrt_low
        else:
            base = self.base_retention_ms[rows]
            low = self.vrt_low[rows]
        out = base * self._dpd_factor()
        if self.vrt.enabled:
            out = np.where(low, out * self.vrt.low_factor, out)
        return out

    def min_possible_retention(self, rows: np.ndarray | None = None) -> np.ndarray:
        """Per-row minimum over all patterns and toggle states (what a perfect profiler sees)."""
        base = self.base_retention_ms if rows is None else self.base_retention_ms[rows]
        vrt_flag = self.has_vrt if rows is None else self.has_vrt[rows]
        out = base * self._dpd_factor()
        if self.vrt.enabled:
            out = np.where(vrt_flag, out * self.vrt.low_factor, out)
        return out

    def dump_csv(self, path) -> None:
        """Debug dump: row_index, base_retention_ms, has_vrt, dpd_worst_pattern."""
        with open(path, "w") as fh:
            fh.write("row_index,base_retention_ms,has_vrt,dpd_worst_pattern\n")
            for i in range(self.num_rows):
                fh.write(
                    f"{i},{float(self.base_retention_ms[i])!r},"
                    f"{int(self.has_vrt[i])},{int(self.dpd_worst_pattern[i])}\n"
                )


def generate_ground_truth(
    device: DeviceConfig,
    dist: RetentionDistribution,
    vrt: VrtModel,
    dpd: DpdModel,
    seed: int,
) -> RetentionGroundTruth:
    """Sample per-row retention attributes, deterministically in all inputs.

    Weak rows are selected by independent per-row Bernoulli draws, so the
    weak count is binomial around weak_fraction * num_rows.
    """
    if dist.floor_ms < device.trefw_ms:
        raise ValueError(
            f"floor_ms {dist.floor_ms} below trefw_ms {device.trefw_ms}: rows would be "
            "unrefreshable at the base rate"
        )
    n = device.num_rows
    rows = np.arange(n, dtype=np.uint64)

    weak = rng.uniform01_vec(seed, rng.TAG_WEAK_SELECT, rows) < dist.weak_fraction
    base = np.full(n, float(dist.strong_value_ms))
    if np.any(weak):
        if dist.kind == DIST_TWO_POPULATION:
            u = rng.uniform01_vec(seed, rng.TAG_BASE_RETENTION, rows)
            draw = dist.floor_ms + u * (dist.weak_high_ms - dist.floor_ms)
        else:
            z = rng.standard_normal_vec(seed, rng.TAG_BASE_RETENTION, rows)
            draw = dist.lognormal_median_ms * np.exp(dist.lognormal_sigma * z)
            # clip into the supported band; mass piles at the edges by design
            draw = np.clip(draw, dist.floor_ms, np.nextafter(dist.weak_high_ms, 0.0))
        base[weak] = draw[weak]

    if vrt.enabled:
        has_vrt = rng.uniform01_vec(seed, rng.TAG_VRT_FLAG, rows) < vrt.affected_fraction
    else:
        has_vrt = np.zeros(n, dtype=bool)

    if dpd.enabled:
        pattern = rng.integer_below_vec(dpd.num_patterns, seed, rng.TAG_DPD_PATTERN, rows)
        pattern = pattern.astype(np.uint32)
    else:
        pattern = np.zeros(n, dtype=np.uint32)

    return RetentionGroundTruth(device, dist, vrt, dpd, seed, base, pattern, has_vrt)
