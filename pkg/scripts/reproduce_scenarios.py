#!/usr/bin/env python
"""
Run the full seed sweep for every shipped scenario and print the averaged
returns table of each.
"""

import argparse
import sys
from pathlib import Path

import pandas as pd

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from tabcds.cli.main import main as cli_main  # noqa: E402

SCENARIOS = ("corridor", "grid_undirected", "grid_directed")


def run_scenario(name, out_root, jobs, verbose):
    out_dir = out_root / name
    argv = ["sweep", "--config", str(ROOT / "configs" / f"{name}.ini"), "--jobs", str(jobs), "--out", str(out_dir)]
    if verbose:
        argv.insert(0, "-v")
    print(f"Running {name} sweep into {out_dir}...")
    code = cli_main(argv)
    aggregate = out_dir / "sweep_aggregate.csv"
    if aggregate.is_file():
        frame = pd.read_csv(aggregate)
        table = frame[frame.metric == "J"].pivot(index="task", columns="strategy", values="mean")
        print(table.to_string(float_format=lambda value: f"{value:.4f}"))
    return code


def main():
    parser = argparse.ArgumentParser(description="Reproduce the shipped CDS scenarios")
    parser.add_argument("--out", type=Path, default=ROOT / "runs", help="Root directory for sweep output")
    parser.add_argument("--jobs", type=int, default=1, help="Worker processes per sweep")
    parser.add_argument("--scenario", action="append", choices=SCENARIOS, help="Run only these scenarios")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()

    failed = [name for name in (args.scenario or SCENARIOS)
              if run_scenario(name, args.out, args.jobs, args.verbose) != 0]
    if failed:
        print(f"Sweeps with failures: {', '.join(failed)}")
        return 1
    print("All sweeps completed successfully.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
