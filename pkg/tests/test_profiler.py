import math

import numpy as np
import pytest

from raidrsim import rng
from raidrsim.profiler import (
    MisclassificationReport,
    ProfilerConfig,
    misclassification_report,
    profile,
)
from raidrsim.raidr import BinConfig
from raidrsim.retention import (
    DeviceConfig,
    DpdModel,
    RetentionDistribution,
    VrtModel,
    generate_ground_truth,
)


def make_gt(num_rows=1000, seed=0, **kw):
    defaults = dict(
        device=DeviceConfig.from_rows(num_rows),
        dist=RetentionDistribution(),
        vrt=VrtModel(),
        dpd=DpdModel(),
    )
    defaults.update(kw)
    return generate_ground_truth(seed=seed, **defaults)


class TestOracleMode:
    def test_no_noise_equals_base(self):
        gt = make_gt()
        prof = profile(gt, ProfilerConfig(mode="oracle"), seed=1)
        assert np.array_equal(prof.measured_retention_ms, gt.base_retention_ms)
        assert prof.provenance == "oracle"

    def test_sees_vrt_and_dpd_minima(self):
        gt = make_gt(
            vrt=VrtModel(enabled=True, affected_fraction=1.0, low_factor=0.5),
            dpd=DpdModel(enabled=True, worst_pattern_factor=0.8),
        )
        prof = profile(gt, ProfilerConfig(mode="oracle"), seed=1)
        assert np.allclose(prof.measured_retention_ms, gt.base_retention_ms * 0.8 * 0.5)

    def test_guard_band_divides(self):
        gt = make_gt()
        p1 = profile(gt, ProfilerConfig(mode="oracle", guard_band_factor=1.0), seed=1)
        p2 = profile(gt, ProfilerConfig(mode="oracle", guard_band_factor=2.0), seed=1)
        assert np.allclose(p2.measured_retention_ms, p1.measured_retention_ms / 2.0)


class TestMeasuredMode:
    def test_full_coverage_no_vrt_equals_oracle(self):
        gt = make_gt(dpd=DpdModel(enabled=True, num_patterns=8, worst_pattern_factor=0.6))
        oracle = profile(gt, ProfilerConfig(mode="oracle"), seed=5)
        measured = profile(
            gt, ProfilerConfig(mode="measured", patterns_tested=8), seed=5
        )
        assert np.array_equal(measured.measured_retention_ms, oracle.measured_retention_ms)

    def test_full_coverage_with_visited_low_state_equals_oracle(self):
        # alternation chain guarantees a low-state visit at window 1
        gt = make_gt(
            vrt=VrtModel(enabled=True, affected_fraction=0.5, low_factor=0.7,
                         p_high_to_low=1.0, p_low_to_high=1.0),
            dpd=DpdModel(enabled=True, num_patterns=4, worst_pattern_factor=0.6),
        )
        oracle = profile(gt, ProfilerConfig(mode="oracle"), seed=5)
        measured = profile(
            gt,
            ProfilerConfig(mode="measured", patterns_tested=4, rounds=4, profiling_window_span=4),
            seed=5,
        )
        assert np.array_equal(measured.measured_retention_ms, oracle.measured_retention_ms)

    def test_patterns_tested_above_universe_rejected(self):
        gt = make_gt(dpd=DpdModel(enabled=True, num_patterns=4))
        with pytest.raises(ValueError, match="patterns_tested"):
            profile(gt, ProfilerConfig(mode="measured", patterns_tested=5), seed=1)

    def test_worst_pattern_miss_probability(self):
        # testing 1 of 8 patterns misses the worst one with probability 7/8
        n = 20_000
        gt = make_gt(
            num_rows=n,
            dist=RetentionDistribution(weak_fraction=1.0),
            dpd=DpdModel(enabled=True, num_patterns=8, worst_pattern_factor=0.5),
            seed=13,
        )
        prof = profile(gt, ProfilerConfig(mode="measured", patterns_tested=1), seed=13)
        true_min = gt.min_possible_retention()
        overestimated = int(np.count_nonzero(prof.measured_retention_ms > true_min + 1e-12))
        expected = n * 7 / 8
        sigma = math.sqrt(n * (7 / 8) * (1 / 8))
        assert abs(overestimated - expected) < 4 * sigma

    def test_never_exceeds_base(self):
        gt = make_gt(
            dist=RetentionDistribution(weak_fraction=0.5),
            vrt=VrtModel(enabled=True, affected_fraction=0.5),
            dpd=DpdModel(enabled=True),
            seed=3,
        )
        for cfg in (
            ProfilerConfig(mode="oracle"),
            ProfilerConfig(mode="measured", patterns_tested=4, rounds=3, profiling_window_span=8),
        ):
            prof = profile(gt, cfg, seed=3)
            assert np.all(prof.measured_retention_ms <= gt.base_retention_ms + 1e-12)

    def test_guard_band_monotone_per_row(self):
        gt = make_gt(
            vrt=VrtModel(enabled=True, affected_fraction=0.3),
            dpd=DpdModel(enabled=True),
            seed=9,
        )
        cfgs = [
            ProfilerConfig(mode="measured", patterns_tested=2, guard_band_factor=g)
            for g in (1.0, 2.0, 4.0)
        ]
        profs = [profile(gt, c, seed=9).measured_retention_ms for c in cfgs]
        assert np.all(profs[1] <= profs[0] + 1e-12)
        assert np.all(profs[2] <= profs[1] + 1e-12)


class TestMisclassification:
    def test_oracle_guard_one_perfect(self):
        gt = make_gt(
            dist=RetentionDistribution(weak_fraction=0.3, floor_ms=128.0),
            vrt=VrtModel(enabled=True, affected_fraction=0.2, low_factor=0.9),
            dpd=DpdModel(enabled=True, worst_pattern_factor=0.9),
            seed=17,
        )
        prof = profile(gt, ProfilerConfig(mode="oracle", guard_band_factor=1.0), seed=17)
        rep = misclassification_report(prof, gt, BinConfig())
        assert rep.unsafe == 0
        assert rep.wasteful == 0
        assert rep.exact == gt.num_rows

    def test_saturating_guard_all_shortest_bin(self):
        # all-weak population; guard >= longest/floor pushes every row to bin 0
        gt = make_gt(dist=RetentionDistribution(weak_fraction=1.0), seed=4)
        guard = 256.0 / 64.0
        prof = profile(gt, ProfilerConfig(mode="oracle", guard_band_factor=guard), seed=4)
        rep = misclassification_report(prof, gt, BinConfig())
        assert rep.unsafe == 0
        true_bin0 = int(np.count_nonzero(gt.min_possible_retention() < 128.0))
        assert rep.wasteful == gt.num_rows - true_bin0
        assert rep.exact == true_bin0

    def test_unsafe_probability_from_markov_hitting(self):
        # all strong rows at 600 ms, all with a 0.3x low state: a row is
        # profiled unsafe iff it never leaves high during the span, i.e.
        # with probability (1 - p_h2l)^(span - 1) from the fresh start
        n, p_h2l, span = 2000, 0.3, 4
        gt = make_gt(
            num_rows=n,
            dist=RetentionDistribution(weak_fraction=0.0, strong_value_ms=600.0),
            vrt=VrtModel(enabled=True, affected_fraction=1.0, low_factor=0.3,
                         p_high_to_low=p_h2l, p_low_to_high=0.0),
            seed=29,
        )
        prof = profile(
            gt,
            ProfilerConfig(mode="measured", rounds=span, profiling_window_span=span),
            seed=29,
        )
        rep = misclassification_report(prof, gt, BinConfig())
        expect_p = (1 - p_h2l) ** (span - 1)
        sigma = math.sqrt(n * expect_p * (1 - expect_p))
        assert abs(rep.unsafe - n * expect_p) < 4 * sigma
        assert rep.unsafe + rep.exact == n

    def test_shape_mismatch_rejected(self):
        gt = make_gt(num_rows=10)
        other = make_gt(num_rows=20)
        prof = profile(other, ProfilerConfig(), seed=1)
        with pytest.raises(ValueError):
            misclassification_report(prof, gt, BinConfig())

    def test_report_totals(self):
        rep = MisclassificationReport(unsafe=1, wasteful=2, exact=3)
        assert rep.total == 6
