#!/usr/bin/env python3
"""Run the three benchmark presets over a seed range and tabulate results.

Usage:
    python3 scripts/run_benchmarks.py [--seeds 10] [--out results/]

Writes one result directory per (preset, seed) via the otbench harness and
prints an iteration/accuracy summary per preset.
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from otkit.cli import PRESETS, ExperimentConfig, run_experiment


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--out", default="results")
    parser.add_argument("--presets", default="sed-paper,sphere-paper,p-sweep")
    args = parser.parse_args()

    out_root = Path(args.out)
    for preset in args.presets.split(","):
        rows = []
        for seed in range(1, args.seeds + 1):
            config = replace(ExperimentConfig(), **PRESETS[preset])
            config = replace(config, seed=seed, trace_every=100,
                             out=str(out_root / preset / f"seed{seed}"))
            summary, code = run_experiment(config)
            solvers = summary["solvers"]
            row = {"seed": seed, "exit": code}
            for name, entry in solvers.items():
                row[f"{name}_iters"] = entry["iterations"]
                row[f"{name}_est"] = entry["report"]["ot_cost_estimate"]
                if entry["report"].get("abs_error_vs_oracle") is not None:
                    row[f"{name}_err"] = entry["report"]["abs_error_vs_oracle"]
            rows.append(row)
        print(f"\n== {preset} ==")
        for row in rows:
            print("  " + json.dumps(row, sort_keys=True))
        fista_iters = [r.get("fista_iters") for r in rows if r.get("fista_iters")]
        sink_iters = [r.get("sinkhorn_iters") for r in rows if r.get("sinkhorn_iters")]
        if fista_iters and sink_iters:
            wins = sum(f < s for f, s in zip(fista_iters, sink_iters))
            print(f"  fista faster on {wins}/{len(fista_iters)} seeds")


if __name__ == "__main__":
    main()
