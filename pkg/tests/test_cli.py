import os
import stat

import pytest

from raidrsim.cli import main
from raidrsim.experiment import (
    ConfigError,
    ExperimentSpec,
    apply_overrides,
    parse_config_text,
    spec_from_flat,
)


def run_cli(*argv):
    return main(list(argv))


SMALL = [
    "--set", "device.density_bits=40960000",  # 5000 rows
    "--set", "sim.horizon_windows=32",
]


class TestConfig:
    def test_defaults_roundtrip(self):
        spec = ExperimentSpec()
        assert spec_from_flat(spec.to_flat()) == spec

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key.*bogus"):
            spec_from_flat({"bogus.key": "1"})

    def test_bad_value_names_key(self):
        with pytest.raises(ConfigError, match="vrt.low_factor"):
            spec_from_flat({"vrt.low_factor": "not-a-number"})

    def test_invariant_violation_is_config_error(self):
        with pytest.raises(ConfigError):
            spec_from_flat({"dist.weak_fraction": "1.5"})

    def test_parse_text_and_comments(self):
        flat = parse_config_text(
            """
            # a comment
            seed = 9
            bins.thresholds_ms = 128,256

            dist.weak_fraction = 0.01
            """
        )
        assert flat == {
            "seed": "9",
            "bins.thresholds_ms": "128,256",
            "dist.weak_fraction": "0.01",
        }

    def test_parse_text_rejects_garbage(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("what is this")

    def test_overrides(self):
        flat = apply_overrides({"seed": "1"}, ["seed=2", "scenario=x"])
        assert flat == {"seed": "2", "scenario": "x"}

    def test_override_requires_equals(self):
        with pytest.raises(ConfigError, match="--set"):
            apply_overrides({}, ["seed:2"])

    def test_explicit_bloom_params_validation(self):
        with pytest.raises(ConfigError, match="bloom.explicit"):
            spec_from_flat({"bloom.explicit_m": "0", "bloom.explicit_k": "2"})

    def test_config_hash_stable(self):
        a = ExperimentSpec().config_hash()
        b = spec_from_flat({}).config_hash()
        assert a == b and len(a) == 64

    def test_seed_follows_master(self):
        spec = spec_from_flat({"seed": "77"})
        assert spec.sim.seed == 77
        assert spec.with_seed(5).sim.seed == 5


class TestSimulateCommand:
    def test_default_scenario_small(self, tmp_path, capsys):
        code = run_cli("simulate", "--out", str(tmp_path), *SMALL)
        out = capsys.readouterr().out
        assert code == 0
        assert "savings_fraction" in out
        savings = float(next(l for l in out.splitlines() if "savings_fraction" in l).split("=")[1])
        assert savings >= 0.74
        assert (tmp_path / "simreport.txt").exists()
        assert (tmp_path / "bins.csv").exists()

    def test_true_default_scenario_full_scale(self, tmp_path, capsys):
        # no overrides: 1e6 rows x 1024 windows
        code = run_cli("simulate", "--out", str(tmp_path))
        out = capsys.readouterr().out
        assert code == 0
        savings = float(next(l for l in out.splitlines() if "savings_fraction" in l).split("=")[1])
        assert savings >= 0.74

    def test_artifacts_byte_identical_across_runs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_cli("simulate", "--out", str(a), "--seed", "5", *SMALL) == 0
        assert run_cli("simulate", "--out", str(b), "--seed", "5", *SMALL) == 0
        assert (a / "simreport.txt").read_bytes() == (b / "simreport.txt").read_bytes()
        assert (a / "bins.csv").read_bytes() == (b / "bins.csv").read_bytes()

    def test_config_error_exit_2(self, tmp_path, capsys):
        code = run_cli(
            "simulate", "--out", str(tmp_path),
            "--set", "bloom.explicit_m=0", "--set", "bloom.explicit_k=4",
        )
        assert code == 2
        assert "bloom.explicit" in capsys.readouterr().err

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        code = run_cli("simulate", "--out", str(tmp_path), "--set", "nope=1")
        assert code == 2
        assert "nope" in capsys.readouterr().err

    def test_unbinnable_exit_3(self, tmp_path, capsys):
        code = run_cli(
            "simulate", "--out", str(tmp_path), *SMALL,
            "--set", "profiler.guard_band_factor=8",
            "--set", "dist.weak_fraction=1.0",
        )
        assert code == 3
        assert "refreshed fast enough" in capsys.readouterr().err

    def test_missing_outdir_created(self, tmp_path):
        target = tmp_path / "deep" / "nested" / "dir"
        assert run_cli("simulate", "--out", str(target), *SMALL) == 0
        assert (target / "simreport.txt").exists()

    @pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
    def test_readonly_outdir_exit_4(self, tmp_path):
        ro = tmp_path / "ro"
        ro.mkdir()
        ro.chmod(stat.S_IRUSR | stat.S_IXUSR)
        try:
            assert run_cli("simulate", "--out", str(ro / "x"), *SMALL) == 4
        finally:
            ro.chmod(stat.S_IRWXU)

    def test_outdir_blocked_by_file_exit_4(self, tmp_path, capsys):
        blocker = tmp_path / "blocked"
        blocker.write_text("in the way")
        assert run_cli("simulate", "--out", str(blocker), *SMALL) == 4
        assert "i/o error" in capsys.readouterr().err

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("seed = 3\ndevice.density_bits = 40960000\nsim.horizon_windows = 16\n")
        assert run_cli("simulate", "--config", str(cfg), "--out", str(tmp_path / "o")) == 0
        text = (tmp_path / "o" / "simreport.txt").read_text()
        assert "seed = 3" in text

    def test_bins_csv_format(self, tmp_path):
        assert run_cli("simulate", "--out", str(tmp_path), *SMALL) == 0
        lines = (tmp_path / "bins.csv").read_text().splitlines()
        assert lines[0].startswith("# config_sha256=")
        assert lines[1] == "bin_index,interval_ms,rows_inserted,filter_m_bits,filter_k,measured_fpr"
        assert len(lines) == 2 + 3 + 1  # comment, header, three bins, total line
        assert lines[-1].startswith("# total_filter_bits=")


class TestSweepCommand:
    def test_guard_band_axis_failures_non_increasing(self, tmp_path):
        code = run_cli(
            "sweep", "--axis", "profiler.guard_band_factor", "--values", "1,4",
            "--out", str(tmp_path),
            "--set", "device.density_bits=12288000",  # 1500 rows
            "--set", "sim.horizon_windows=32",
            "--set", "dist.weak_fraction=0",
            "--set", "dist.strong_value_ms=600",
            "--set", "vrt.enabled=true",
            "--set", "vrt.affected_fraction=0.05",
            "--set", "vrt.low_factor=0.3",
            "--set", "vrt.p_high_to_low=0.2",
            "--set", "profiler.mode=measured",
            "--set", "profiler.profiling_window_span=1",
        )
        assert code == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        header = lines[1].split(",")
        fail_col = header.index("retention_failures")
        fails = [int(l.split(",")[fail_col]) for l in lines[2:]]
        assert fails[0] >= fails[1]
        assert fails[1] == 0

    def test_weak_fraction_axis_savings_non_increasing(self, tmp_path):
        code = run_cli(
            "sweep", "--axis", "dist.weak_fraction", "--values", "0,0.001,0.01",
            "--out", str(tmp_path), *SMALL,
        )
        assert code == 0
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        header = lines[1].split(",")
        col = header.index("savings_fraction")
        savings = [float(l.split(",")[col]) for l in lines[2:]]
        assert savings == sorted(savings, reverse=True)
        assert (tmp_path / "point_000" / "simreport.txt").exists()

    def test_unknown_axis_exit_2(self, tmp_path, capsys):
        assert run_cli("sweep", "--axis", "nope", "--values", "1", "--out", str(tmp_path)) == 2
        assert "axis" in capsys.readouterr().err

    def test_parallel_jobs_same_csv(self, tmp_path):
        common = [
            "--axis", "seed", "--values", "1,2,3", *SMALL,
        ]
        assert run_cli("sweep", *common, "--out", str(tmp_path / "serial")) == 0
        assert run_cli("sweep", *common, "--out", str(tmp_path / "par"), "--jobs", "3") == 0
        assert (tmp_path / "serial" / "sweep.csv").read_bytes() == (
            tmp_path / "par" / "sweep.csv"
        ).read_bytes()


class TestProfileCommand:
    def test_profile_csv(self, tmp_path):
        code = run_cli(
            "profile", "--out", str(tmp_path),
            "--set", "device.density_bits=8192000",  # 1000 rows
        )
        assert code == 0
        lines = (tmp_path / "profile.csv").read_text().splitlines()
        assert lines[0].startswith("# config_sha256=")
        assert lines[1] == "row_index,measured_retention_ms,assigned_bin"
        assert len(lines) == 1002
        row = lines[2].split(",")
        assert row[0] == "0" and int(row[2]) in (0, 1, 2)
        assert float(row[1]) > 0  # plain decimal, no numpy scalar repr
        assert "np." not in lines[2]


class TestOverheadCommand:
    def test_density_sweep_csv(self, tmp_path, capsys):
        code = run_cli("overhead", "--out", str(tmp_path))
        out = capsys.readouterr().out
        assert code == 0
        assert "calibrated band" in out
        lines = (tmp_path / "overhead.csv").read_text().splitlines()
        assert lines[1] == "density_bits,policy,savings,throughput_loss,refresh_energy_fraction,trfc_ns_used"
        base_rows = [l.split(",") for l in lines[2:] if l.split(",")[1] == "baseline"]
        losses = [float(r[3]) for r in base_rows]
        assert losses == sorted(losses)
        # 64 Gb baseline sits in the near-half band
        last = base_rows[-1]
        assert int(last[0]) == 64 * 2**30
        assert 0.35 <= float(last[3]) <= 0.55


class TestSelftestCommand:
    def test_fresh_build_passes(self, capsys):
        assert run_cli("selftest") == 0
        out = capsys.readouterr().out
        assert out.count(": ok") == 5

    def test_fault_injection_names_property(self, capsys):
        assert run_cli("selftest", "--fault", "corrupt-bloom") == 3
        out = capsys.readouterr().out
        assert "bloom-no-false-negatives: FAIL" in out

    def test_unknown_fault_exit_2(self, capsys):
        assert run_cli("selftest", "--fault", "nope") == 2

    def test_selftest_deterministic(self, capsys):
        run_cli("selftest")
        first = capsys.readouterr().out
        run_cli("selftest")
        second = capsys.readouterr().out
        assert first == second
