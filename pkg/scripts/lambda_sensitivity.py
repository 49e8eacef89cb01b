"""How the task-3 tier split moves when one complexity term dominates.

Re-tiers one generated corpus under the default weights and under each unit
weight vector, then reports tier sizes and how many samples change tier.
"""

import argparse
from collections import Counter

from routebench.gen import assign_task3_tiers, read_samples

NAMES = ("inter", "intra", "count", "topo")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("tasks", help="task JSONL written by `routebench generate`")
    args = ap.parse_args()

    samples = [s for s in read_samples(args.tasks) if s.task == 3]
    if not samples:
        raise SystemExit("no task 3 samples in file")
    assign_task3_tiers(samples)
    base = [s.tier for s in samples]
    print(f"default weights: {dict(Counter(base))}")
    for k, name in enumerate(NAMES):
        lam = tuple(float(i == k) for i in range(4))
        t = assign_task3_tiers(samples, lam)
        tiers = [s.tier for s in samples]
        moved = sum(a != b for a, b in zip(base, tiers))
        print(f"only {name:<6} thresholds=({t[0]:.3f}, {t[1]:.3f}) {dict(Counter(tiers))} moved={moved}/{len(samples)}")


if __name__ == "__main__":
    main()
