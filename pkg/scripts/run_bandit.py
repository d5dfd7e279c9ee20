#!/usr/bin/env python3
"""Train the selector on the synthetic contextual bandit and report how often
the greedy policy picks the best valid category."""
from __future__ import annotations

import argparse
import time

from reign.synthetic import BanditConfig, run_bandit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--updates", type=int, default=2000)
    ap.add_argument("--alpha", type=float, default=1e-3)
    ap.add_argument("--tau", type=float, default=0.3)
    args = ap.parse_args()
    for seed in args.seeds:
        t0 = time.perf_counter()
        acc, _ = run_bandit(args.updates, args.alpha, args.tau, bandit=BanditConfig(seed=seed))
        print(f"seed {seed}: greedy accuracy {acc:.3f} ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
