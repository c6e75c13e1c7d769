"""Experiment configuration: flat key-value files, strict parsing, seeds.

The config format is plain text, one `section.key = value` per line, with
`#` comments and blank lines ignored.  Unknown keys are rejected before
any computation.  Lists are comma separated; the tRFC table is written as
`gbit:ns` pairs.  The same canonical rendering feeds the config hash that
every artifact echoes.

Seed splitting: a master seed drives the run; sweep point i derives its
seed as hash(master, TAG_SWEEP_POINT, i), so points are independent yet
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import rng
from .bloom import BloomParams
from .overhead import OverheadInputs
from .profiler import ProfilerConfig
from .retention import DeviceConfig, DpdModel, RetentionDistribution, VrtModel
from .raidr import BinConfig
from .simulate import SimConfig, config_sha256


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value, or violated invariant."""


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_bool(v: bool) -> str:
    return "true" if v else "false"


def _fmt_float_list(vs) -> str:
    return ",".join(_fmt_float(v) for v in vs)


def _fmt_table(d: dict[float, float]) -> str:
    return ",".join(f"{_fmt_float(k)}:{_fmt_float(d[k])}" for k in sorted(d))


def _parse_bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_float_list(s: str) -> tuple[float, ...]:
    t = s.strip()
    if not t:
        return ()
    return tuple(float(x) for x in t.split(","))


def _parse_table(s: str) -> dict[float, float]:
    out = {}
    for pair in s.strip().split(","):
        k, sep, v = pair.partition(":")
        if not sep:
            raise ValueError(f"expected gbit:ns pairs, got {pair!r}")
        out[float(k)] = float(v)
    return out


def _parse_opt_int(s: str):
    t = s.strip()
    return None if not t else int(t)


def _fmt_opt_int(v) -> str:
    return "" if v is None else str(v)


# key -> (parser, formatter); defaults come from the dataclasses
_SCHEMA: dict[str, tuple] = {
    "scenario": (str, str),
    "seed": (int, str),
    "device.density_bits": (int, str),
    "device.row_size_bits": (int, str),
    "device.trefw_ms": (float, _fmt_float),
    "device.refresh_cmds_per_window": (int, str),
    "device.banks": (int, str),
    "device.trfc_table_ns": (_parse_table, _fmt_table),
    "dist.kind": (str, str),
    "dist.weak_fraction": (float, _fmt_float),
    "dist.floor_ms": (float, _fmt_float),
    "dist.weak_high_ms": (float, _fmt_float),
    "dist.strong_value_ms": (float, _fmt_float),
    "dist.lognormal_median_ms": (float, _fmt_float),
    "dist.lognormal_sigma": (float, _fmt_float),
    "vrt.enabled": (_parse_bool, _fmt_bool),
    "vrt.affected_fraction": (float, _fmt_float),
    "vrt.low_factor": (float, _fmt_float),
    "vrt.p_high_to_low": (float, _fmt_float),
    "vrt.p_low_to_high": (float, _fmt_float),
    "dpd.enabled": (_parse_bool, _fmt_bool),
    "dpd.num_patterns": (int, str),
    "dpd.worst_pattern_factor": (float, _fmt_float),
    "profiler.mode": (str, str),
    "profiler.patterns_tested": (int, str),
    "profiler.rounds": (int, str),
    "profiler.guard_band_factor": (float, _fmt_float),
    "profiler.profiling_window_span": (int, str),
    "bins.thresholds_ms": (_parse_float_list, _fmt_float_list),
    "bins.base_interval_ms": (float, _fmt_float),
    "bloom.target_fpr": (float, _fmt_float),
    "bloom.explicit_m": (_parse_opt_int, _fmt_opt_int),
    "bloom.explicit_k": (_parse_opt_int, _fmt_opt_int),
    "sim.horizon_windows": (int, str),
    "overhead.densities_gbit": (_parse_float_list, _fmt_float_list),
    "overhead.extrapolation_anchor_gbit": (float, _fmt_float),
    "overhead.e_refresh_cmd_nj_per_gbit": (float, _fmt_float),
    "overhead.e_background_mw": (float, _fmt_float),
    "overhead.e_activity_mw": (float, _fmt_float),
    "overhead.raidr_savings": (float, _fmt_float),
}


@dataclass(frozen=True)
class OverheadConfig:
    densities_gbit: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    extrapolation_anchor_gbit: float = 4.0
    e_refresh_cmd_nj_per_gbit: float = 22.5
    e_background_mw: float = 75.0
    e_activity_mw: float = 150.0
    raidr_savings: float = 0.75


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one run needs; every field has a documented default."""

    scenario: str = "default"
    seed: int = 0
    device: DeviceConfig = field(default_factory=DeviceConfig)
    dist: RetentionDistribution = field(default_factory=RetentionDistribution)
    vrt: VrtModel = field(default_factory=VrtModel)
    dpd: DpdModel = field(default_factory=DpdModel)
    profiler: ProfilerConfig = field(default_factory=ProfilerConfig)
    bins: BinConfig = field(default_factory=BinConfig)
    bloom_target_fpr: float = 1e-3
    bloom_explicit_m: int | None = None
    bloom_explicit_k: int | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    overhead: OverheadConfig = field(default_factory=OverheadConfig)

    def __post_init__(self):
        # the master seed governs; keep the sim config in lockstep
        if self.sim.seed != self.seed:
            object.__setattr__(self, "sim", replace(self.sim, seed=self.seed))

    @property
    def bloom_budget(self):
        """Explicit BloomParams when configured, else the per-bin FPR target."""
        if self.bloom_explicit_m is not None or self.bloom_explicit_k is not None:
            m = 0 if self.bloom_explicit_m is None else self.bloom_explicit_m
            k = 1 if self.bloom_explicit_k is None else self.bloom_explicit_k
            try:
                return BloomParams(m=m, k=k)
            except ValueError as exc:
                raise ConfigError(f"bloom.explicit_m/bloom.explicit_k: {exc}") from exc
        if not 0.0 < self.bloom_target_fpr < 1.0:
            raise ConfigError(f"bloom.target_fpr must be in (0, 1), got {self.bloom_target_fpr}")
        return self.bloom_target_fpr

    def overhead_inputs(self) -> OverheadInputs:
        return OverheadInputs(
            device=self.device,
            extrapolation_anchor_gbit=self.overhead.extrapolation_anchor_gbit,
            e_refresh_cmd_nj_per_gbit=self.overhead.e_refresh_cmd_nj_per_gbit,
            e_background_mw=self.overhead.e_background_mw,
            e_activity_mw=self.overhead.e_activity_mw,
        )

    def sweep_seed(self, point_index: int) -> int:
        return rng.hash_words(self.seed, rng.TAG_SWEEP_POINT, point_index)

    def to_flat(self) -> dict[str, str]:
        d, di, v, dp, pf, b, o = (
            self.device, self.dist, self.vrt, self.dpd, self.profiler, self.bins, self.overhead
        )
        values = {
            "scenario": self.scenario,
            "seed": self.seed,
            "device.density_bits": d.density_bits,
            "device.row_size_bits": d.row_size_bits,
            "device.trefw_ms": d.trefw_ms,
            "device.refresh_cmds_per_window": d.refresh_cmds_per_window,
            "device.banks": d.banks,
            "device.trfc_table_ns": d.trfc_table_ns,
            "dist.kind": di.kind,
            "dist.weak_fraction": di.weak_fraction,
            "dist.floor_ms": di.floor_ms,
            "dist.weak_high_ms": di.weak_high_ms,
            "dist.strong_value_ms": di.strong_value_ms,
            "dist.lognormal_median_ms": di.lognormal_median_ms,
            "dist.lognormal_sigma": di.lognormal_sigma,
            "vrt.enabled": v.enabled,
            "vrt.affected_fraction": v.affected_fraction,
            "vrt.low_factor": v.low_factor,
            "vrt.p_high_to_low": v.p_high_to_low,
            "vrt.p_low_to_high": v.p_low_to_high,
            "dpd.enabled": dp.enabled,
            "dpd.num_patterns": dp.num_patterns,
            "dpd.worst_pattern_factor": dp.worst_pattern_factor,
            "profiler.mode": pf.mode,
            "profiler.patterns_tested": pf.patterns_tested,
            "profiler.rounds": pf.rounds,
            "profiler.guard_band_factor": pf.guard_band_factor,
            "profiler.profiling_window_span": pf.profiling_window_span,
            "bins.thresholds_ms": b.thresholds_ms,
            "bins.base_interval_ms": b.base_interval_ms,
            "bloom.target_fpr": self.bloom_target_fpr,
            "bloom.explicit_m": self.bloom_explicit_m,
            "bloom.explicit_k": self.bloom_explicit_k,
            "sim.horizon_windows": self.sim.horizon_windows,
            "overhead.densities_gbit": o.densities_gbit,
            "overhead.extrapolation_anchor_gbit": o.extrapolation_anchor_gbit,
            "overhead.e_refresh_cmd_nj_per_gbit": o.e_refresh_cmd_nj_per_gbit,
            "overhead.e_background_mw": o.e_background_mw,
            "overhead.e_activity_mw": o.e_activity_mw,
            "overhead.raidr_savings": o.raidr_savings,
        }
        return {k: _SCHEMA[k][1](values[k]) for k in _SCHEMA}

    def config_hash(self) -> str:
        return config_sha256(self.to_flat())

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return replace(self, seed=seed, sim=replace(self.sim, seed=seed))


def spec_from_flat(flat: dict[str, str]) -> ExperimentSpec:
    """Build a validated spec from flat string values; unknown keys are fatal."""
    unknown = sorted(set(flat) - set(_SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    base = ExperimentSpec().to_flat()
    base.update(flat)

    parsed = {}
    for key, raw in base.items():
        parser = _SCHEMA[key][0]
        try:
            parsed[key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc

    def section(prefix: str) -> dict[str, object]:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in parsed.items() if k.startswith(prefix + ".")}

    try:
        device = DeviceConfig(**section("device"))
        dist = RetentionDistribution(**section("dist"))
        vrt = VrtModel(**section("vrt"))
        dpd = DpdModel(**section("dpd"))
        prof = ProfilerConfig(**section("profiler"))
        bins = BinConfig(**section("bins"))
        sim = SimConfig(horizon_windows=parsed["sim.horizon_windows"], seed=parsed["seed"])
        over = OverheadConfig(**section("overhead"))
        spec = ExperimentSpec(
            scenario=parsed["scenario"],
            seed=parsed["seed"],
            device=device,
            dist=dist,
            vrt=vrt,
            dpd=dpd,
            profiler=prof,
            bins=bins,
            bloom_target_fpr=parsed["bloom.target_fpr"],
            bloom_explicit_m=parsed["bloom.explicit_m"],
            bloom_explicit_k=parsed["bloom.explicit_k"],
            sim=sim,
            overhead=over,
        )
        _ = spec.bloom_budget  # force explicit-params validation
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines; comments (#) and blank lines are ignored."""
    flat = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        flat[key.strip()] = value.strip()
    return flat


def load_config(path) -> dict[str, str]:
    with open(path) as fh:
        return parse_config_text(fh.read())


def apply_overrides(flat: dict[str, str], overrides) -> dict[str, str]:
    """Apply repeatable --set key=value pairs on top of a flat config."""
    out = dict(flat)
    for item in overrides or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out
