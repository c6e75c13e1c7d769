#!/usr/bin/env python3
"""Refresh overhead versus chip density, baseline vs multi-rate refresh.

Prints the throughput-loss and energy-fraction table and optionally writes
the CSV.  tRFC values beyond the 8 Gb table entry are proportional
projections from the 4 Gb point: a calibrated band, not vendor data.
"""

import argparse

from raidrsim.overhead import POLICY_BASELINE, POLICY_RAIDR, OverheadInputs, density_sweep
from raidrsim.retention import DeviceConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--densities", default="1,2,4,8,16,32,64", help="Gbit values, ascending")
    parser.add_argument("--savings", type=float, default=0.75, help="savings for the multi-rate column")
    parser.add_argument("--csv", default=None, help="also write rows to this CSV path")
    args = parser.parse_args()

    inputs = OverheadInputs(device=DeviceConfig())
    densities = [float(d) for d in args.densities.split(",")]
    points = density_sweep(
        inputs, densities,
        policies=((POLICY_BASELINE, 0.0), (POLICY_RAIDR, args.savings)),
    )

    print(f"{'Gbit':>8} {'policy':>9} {'tRFC ns':>9} {'loss':>8} {'energy':>8}")
    for p in points:
        print(
            f"{p.density_gbit:8.1f} {p.policy:>9} {p.trfc_ns_used:9.1f} "
            f"{p.throughput_loss:8.4f} {p.refresh_energy_fraction:8.4f}"
        )

    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("density_bits,policy,savings,throughput_loss,refresh_energy_fraction,trfc_ns_used\n")
            for p in points:
                fh.write(
                    f"{p.density_bits},{p.policy},{p.savings!r},{p.throughput_loss!r},"
                    f"{p.refresh_energy_fraction!r},{p.trfc_ns_used!r}\n"
                )
        print(f"wrote {args.csv}")


if __name__ == "__main__":
    main()
