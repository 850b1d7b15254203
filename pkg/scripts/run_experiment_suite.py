#!/usr/bin/env python3
"""Run the built-in experiment suite end to end and emit plot-ready CSVs.

Full-fidelity runs use 100 trials per sweep point and take hours for the
heavier experiments (nonlinear, wideband, the TL-SBL columns); pass
``--trials`` to downscale for a desk check. Each experiment writes
rows.csv/aggregate.csv into its own subdirectory of --out.
"""

import argparse
import time

from trajloc import emit_results, run_scenario
from trajloc.harness import apply_overrides, builtin_experiments


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results")
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=2)
    parser.add_argument(
        "--only", default=None, help="comma-separated experiment names (default: all)"
    )
    args = parser.parse_args()
    wanted = set(args.only.split(",")) if args.only else None

    for config in builtin_experiments():
        if wanted and config.name not in wanted:
            continue
        config = apply_overrides(config, trials=args.trials, seed=args.seed)
        t0 = time.perf_counter()
        report = run_scenario(config, n_jobs=args.jobs)
        rows_path, agg_path = emit_results(report, f"{args.out}/{config.name}")
        print(f"{config.name:<12} {time.perf_counter() - t0:8.1f} s  -> {agg_path}")


if __name__ == "__main__":
    main()
