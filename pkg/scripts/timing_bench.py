"""Update and query timings for all methods, with a short trend summary.

Usage: python3 scripts/timing_bench.py [--kmax 1000] [--reps 10] [--out bench.csv]
"""

import argparse
import sys
import time

import numpy as np
from scipy import stats

from ensflow.harness.bench import METHODS, bench_csv, run_timing_bench
from ensflow.harness.scenarios import reference_scenario


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--kmax", type=int, default=1000)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="timing_bench.csv")
    args = p.parse_args(argv)

    t0 = time.perf_counter()
    rows = run_timing_bench(reference_scenario(), k_max=args.kmax, reps=args.reps, seed=args.seed)
    elapsed = time.perf_counter() - t0
    with open(args.out, "w") as f:
        f.write(bench_csv(rows))

    k = np.arange(1, args.kmax + 1)
    for m in METHODS:
        up = np.array([r["update_ns"] for r in rows if r["method"] == m])
        fit = stats.linregress(k, up)
        rho = stats.spearmanr(k, up)[0]
        print(f"{m:5s} median update {np.median(up) / 1e3:9.1f} us  slope {fit.slope:8.2f} "
              f"+- {1.96 * fit.stderr:.2f} ns/k  spearman {rho:.3f}")
    print(f"bench took {elapsed:.0f} s; wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
