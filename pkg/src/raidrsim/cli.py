"""Command-line front end.

Subcommands: simulate, sweep, profile, overhead, selftest.
Exit codes: 0 success, 2 configuration error, 3 invariant violation,
4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import overhead as overhead_mod
from . import rng
from .experiment import (
    ConfigError,
    ExperimentSpec,
    apply_overrides,
    load_config,
    spec_from_flat,
)
from .profiler import profile
from .raidr import UnbinnableRowError, build_bins, measured_filter_fprs
from .retention import generate_ground_truth
from .selftest import run_selftest
from .simulate import RefreshSimulation, check_report_invariants

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_IO = 4


def _build_spec(args) -> ExperimentSpec:
    flat = load_config(args.config) if args.config else {}
    flat = apply_overrides(flat, args.set)
    if args.seed is not None:
        flat["seed"] = str(args.seed)
    return spec_from_flat(flat)


def _ensure_outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _csv_comment(spec: ExperimentSpec) -> str:
    return f"# config_sha256={spec.config_hash()} seed={spec.seed}"


def _write_text(path: Path, text: str) -> None:
    path.write_text(text)


def write_bins_csv(path: Path, spec: ExperimentSpec, sim: RefreshSimulation) -> None:
    fprs = measured_filter_fprs(sim.bins, sim.retention_profile)
    lines = [_csv_comment(spec), "bin_index,interval_ms,rows_inserted,filter_m_bits,filter_k,measured_fpr"]
    for b, filt in enumerate(sim.bins.filters):
        lines.append(
            f"{b},{sim.bins.intervals_ms[b]!r},{sim.bins.counts[b]},"
            f"{filt.params.m},{filt.params.k},{fprs[b]!r}"
        )
    d = sim.bins.default_bin
    lines.append(f"{d},{sim.bins.intervals_ms[d]!r},{sim.bins.counts[d]},0,0,0.0")
    lines.append(f"# total_filter_bits={sim.bins.total_filter_bits}")
    _write_text(path, "\n".join(lines) + "\n")


def _run_simulation(spec: ExperimentSpec) -> tuple[RefreshSimulation, object]:
    sim = RefreshSimulation(
        spec.sim, spec.device, spec.dist, spec.vrt, spec.dpd, spec.profiler,
        spec.bins, spec.bloom_budget, scenario=spec.scenario, config_echo=spec.to_flat(),
    )
    report = sim.run()
    return sim, report


def cmd_simulate(args) -> int:
    spec = _build_spec(args)
    out = _ensure_outdir(args)
    sim, report = _run_simulation(spec)
    _write_text(out / "simreport.txt", report.to_text())
    write_bins_csv(out / "bins.csv", spec, sim)
    print(f"scenario = {report.scenario}")
    print(f"savings_fraction = {report.savings_fraction:.6f}")
    print(f"retention_failures = {report.retention_failures}")
    print(f"unsafe_rows = {report.unsafe_rows}")
    print(f"total_filter_bits = {report.total_filter_bits}")
    print(f"wall_time_s = {report.wall_time_s:.3f}")
    print(f"artifacts: {out / 'simreport.txt'}, {out / 'bins.csv'}")
    violations = check_report_invariants(report, spec.profiler)
    for v in violations:
        print(f"INVARIANT VIOLATION: {v}", file=sys.stderr)
    return EXIT_INVARIANT if violations else EXIT_OK


def _sweep_point(payload):
    index, flat, key, value = payload
    flat = dict(flat)
    flat[key] = value
    spec = spec_from_flat(flat)
    if key != "seed":  # an explicit seed axis overrides the derived per-point seed
        spec = spec.with_seed(spec.sweep_seed(index))
    sim, report = _run_simulation(spec)
    inputs = spec.overhead_inputs()
    row = {
        "point_index": index,
        "axis": key,
        "value": value,
        "seed": spec.seed,
        "savings_fraction": report.savings_fraction,
        "retention_failures": report.retention_failures,
        "unsafe_rows": report.unsafe_rows,
        "fpr_extra_refreshes": report.fpr_extra_refreshes,
        "refreshes_issued": report.refreshes_issued,
        "throughput_loss_baseline": overhead_mod.throughput_loss(inputs),
        "throughput_loss_raidr": overhead_mod.throughput_loss(
            inputs, overhead_mod.POLICY_RAIDR, report.savings_fraction
        ),
        "refresh_energy_fraction_baseline": overhead_mod.refresh_energy_fraction(inputs),
        "refresh_energy_fraction_raidr": overhead_mod.refresh_energy_fraction(
            inputs, overhead_mod.POLICY_RAIDR, report.savings_fraction
        ),
    }
    return index, row, report.to_text()


_SWEEP_COLUMNS = (
    "point_index", "axis", "value", "seed", "savings_fraction", "retention_failures",
    "unsafe_rows", "fpr_extra_refreshes", "refreshes_issued", "throughput_loss_baseline",
    "throughput_loss_raidr", "refresh_energy_fraction_baseline", "refresh_energy_fraction_raidr",
)


def cmd_sweep(args) -> int:
    from .experiment import _SCHEMA  # schema doubles as the set of sweepable axes

    if args.axis not in _SCHEMA:
        raise ConfigError(f"unknown sweep axis {args.axis!r}")
    flat = load_config(args.config) if args.config else {}
    flat = apply_overrides(flat, args.set)
    if args.seed is not None:
        flat["seed"] = str(args.seed)
    spec_from_flat(flat)  # validate the base config before spawning work
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = _ensure_outdir(args)

    payloads = [(i, flat, args.axis, v) for i, v in enumerate(values)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_point, payloads))
    else:
        results = [_sweep_point(p) for p in payloads]
    results.sort(key=lambda r: r[0])

    base_spec = spec_from_flat(flat)
    lines = [_csv_comment(base_spec), ",".join(_SWEEP_COLUMNS)]
    for index, row, report_text in results:
        point_dir = out / f"point_{index:03d}"
        point_dir.mkdir(exist_ok=True)
        _write_text(point_dir / "simreport.txt", report_text)
        lines.append(",".join(_fmt_cell(row[c]) for c in _SWEEP_COLUMNS))
    _write_text(out / "sweep.csv", "\n".join(lines) + "\n")
    print(f"swept {args.axis} over {len(values)} values -> {out / 'sweep.csv'}")
    return EXIT_OK


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_profile(args) -> int:
    spec = _build_spec(args)
    out = _ensure_outdir(args)
    gt = generate_ground_truth(spec.device, spec.dist, spec.vrt, spec.dpd, spec.seed)
    prof = profile(gt, spec.profiler, rng.hash_words(spec.seed, rng.TAG_PROFILER_SEED))
    bins_idx = spec.bins.classify(prof.measured_retention_ms)
    path = out / "profile.csv"
    with open(path, "w") as fh:
        fh.write(_csv_comment(spec) + "\n")
        fh.write("row_index,measured_retention_ms,assigned_bin\n")
        measured = prof.measured_retention_ms
        for i in range(prof.num_rows):
            fh.write(f"{i},{float(measured[i])!r},{int(bins_idx[i])}\n")
    print(f"profiled {prof.num_rows} rows ({prof.provenance} mode) -> {path}")
    return EXIT_OK


def cmd_overhead(args) -> int:
    spec = _build_spec(args)
    out = _ensure_outdir(args)
    inputs = spec.overhead_inputs()
    points = overhead_mod.density_sweep(
        inputs,
        spec.overhead.densities_gbit,
        policies=(
            (overhead_mod.POLICY_BASELINE, 0.0),
            (overhead_mod.POLICY_RAIDR, spec.overhead.raidr_savings),
        ),
    )
    lines = [_csv_comment(spec), "density_bits,policy,savings,throughput_loss,refresh_energy_fraction,trfc_ns_used"]
    for p in points:
        lines.append(
            f"{p.density_bits},{p.policy},{p.savings!r},{p.throughput_loss!r},"
            f"{p.refresh_energy_fraction!r},{p.trfc_ns_used!r}"
        )
    path = out / "overhead.csv"
    _write_text(path, "\n".join(lines) + "\n")
    print(
        "# tRFC beyond the table is a proportional projection from the "
        f"{inputs.extrapolation_anchor_gbit} Gb entry: treat high-density rows as a "
        "calibrated band, not measured values"
    )
    print(
        f"# energy constants: e_refresh_cmd={inputs.e_refresh_cmd_nj_per_gbit} nJ/Gb, "
        f"background={inputs.e_background_mw} mW, activity={inputs.e_activity_mw} mW"
    )
    for p in points:
        print(
            f"{p.density_gbit:8.3f} Gb  {p.policy:8s}  loss={p.throughput_loss:.4f}  "
            f"energy_fraction={p.refresh_energy_fraction:.4f}  trfc={p.trfc_ns_used:.1f} ns"
        )
    print(f"artifact: {path}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    failures = run_selftest(fault=args.fault)
    return EXIT_INVARIANT if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raidrsim",
        description="Retention-aware multi-rate DRAM refresh simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", metavar="PATH", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--out", default=out_default, metavar="DIR", help="artifact directory")
        p.add_argument("--seed", type=int, default=None, metavar="U64", help="master seed override")

    p_sim = sub.add_parser("simulate", help="run one closed-loop simulation")
    common(p_sim, "out/simulate")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run one simulation per axis value")
    common(p_sweep, "out/sweep")
    p_sweep.add_argument("--axis", required=True, metavar="KEY", help="config key to sweep")
    p_sweep.add_argument("--values", required=True, metavar="V1,V2,...", help="axis values")
    p_sweep.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel sweep points")
    p_sweep.set_defaults(func=cmd_sweep)

    p_prof = sub.add_parser("profile", help="profile retention and export per-row CSV")
    common(p_prof, "out/profile")
    p_prof.set_defaults(func=cmd_profile)

    p_over = sub.add_parser("overhead", help="analytic density sweep of refresh overhead")
    common(p_over, "out/overhead")
    p_over.set_defaults(func=cmd_overhead)

    p_self = sub.add_parser("selftest", help="run the embedded invariant suite")
    p_self.add_argument(
        "--fault", default=None, metavar="NAME",
        help="inject a named fault (diagnostic aid, e.g. corrupt-bloom)",
    )
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnbinnableRowError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
