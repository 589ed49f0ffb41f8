#!/usr/bin/env python3
"""Run the artificial-instance sweep and write the four CSVs.

The full 27-setting sweep is CPU-hungry (exact solves of six models per
instance); start with a single setting or a couple of seeds to gauge cost:

    python scripts/run_sweep.py --settings 2,1,3 --seeds 2 --out-dir out
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from ssfp.experiments import (
    aggregate_matrix,
    run_sweep,
    write_matrix_csv,
    write_ratios_csv,
    write_sweep_csv,
)
from ssfp.instances import SweepConfig, all_settings


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--settings", default="all", help='"all" or "S,G,T"')
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()

    seeds = list(range(args.seeds))
    if args.settings == "all":
        configs = list(all_settings(seeds))
    else:
        s, g, t = (int(x) for x in args.settings.split(","))
        configs = [SweepConfig(s, g, t, tuple(seeds))]

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    records, matrix = run_sweep(configs, args.threads)
    elapsed = time.perf_counter() - started
    write_sweep_csv(records, out_dir / "sweep.csv")
    write_matrix_csv(records, out_dir / "matrix.csv")
    write_ratios_csv(records, out_dir / "ratios.csv")
    print(f"{len(records)} records in {elapsed:.0f}s -> {out_dir}")
    for row, name in zip(matrix.values, ("DO", "RO", "SO")):
        print(f"  {name}: " + "  ".join(f"{v:6.3f}" for v in row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
