"""Run a sweep from a config file and print the best clique size per model."""

from __future__ import annotations

import argparse
import time

from ifnlogo.harness import aggregate, load_config, run_sweep, write_aggregate, write_results


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("config")
    parser.add_argument("--results", default="results.csv")
    parser.add_argument("--aggregate", default="aggregate.csv")
    args = parser.parse_args()
    cfg = load_config(args.config)
    start = time.perf_counter()
    results = run_sweep(cfg)
    write_results(results, args.results)
    rows = aggregate(results)
    write_aggregate(rows, args.aggregate)
    print(f"{len(results)} cells in {time.perf_counter() - start:.1f}s")
    best = sorted((r for r in rows if r.is_argmax), key=lambda r: -r.mean_ll_test)
    for r in best:
        print(f"{r.model:20s} R={r.max_clique:3d} mean_ll_test={r.mean_ll_test:.3f} [{r.q10:.3f}, {r.q90:.3f}]")


if __name__ == "__main__":
    main()
