"""Leave-one-out comparison of the uniform, subspace and active policies.

Usage: python3 scripts/policy_loocv.py [--seeds 20] [--holdouts 20] [--out loocv.csv]

Runs on the ``hotspot`` scenario and writes the seed- and holdout-averaged
RMS curve for each policy, alongside the mean ideal floor.
"""

import argparse
import csv
import sys

import numpy as np

from ensflow.harness.loocv import loocv_sweep
from ensflow.harness.scenarios import hotspot_scenario

POLICIES = ("uniform", "subspace", "active")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--holdouts", type=int, default=None, help="first N members (default: all)")
    p.add_argument("--out", default="policy_loocv.csv")
    args = p.parse_args(argv)

    sc = hotspot_scenario()
    E, _ = sc.generate(sc.seed)
    holdouts = None if args.holdouts is None else range(min(args.holdouts, E.n_members))
    curves, ideal = {}, []
    for r in loocv_sweep(E, POLICIES, range(args.seeds), E.n_positions, sc.noise, sc.kernel, sc.truncation,
                         holdouts=holdouts):
        curves.setdefault(r.policy, []).append(r.rms)
        ideal.append(r.ideal_rms)
    avg = {k: np.mean(v, axis=0) for k, v in curves.items()}
    floor = float(np.mean(ideal))

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["k", *POLICIES, "ideal"])
        for k in range(E.n_positions + 1):
            w.writerow([k, *(repr(float(avg[p][k])) for p in POLICIES), repr(floor)])

    n = E.n_positions
    small, large = slice(1, n // 10 + 1), slice(int(np.ceil(n / 2)), n + 1)
    for pol in POLICIES:
        c = avg[pol]
        print(f"{pol:9s} final {c[-1]:.4f}  early mean {c[small].mean():.4f}  late mean {c[large].mean():.4f}")
    print(f"ideal floor {floor:.4f}; wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
