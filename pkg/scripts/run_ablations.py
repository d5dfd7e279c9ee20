#!/usr/bin/env python3
"""Compare category-selection strategies: augmentation size and QA_robust
metrics for each mode."""
from __future__ import annotations

import argparse
from pathlib import Path

from reign.config import load_config
from reign.pipeline import MODES, _run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--modes", nargs="+", default=[m for m in MODES if m != "completion_file"])
    ap.add_argument("--out", type=Path, default=Path("runs/ablations"))
    args = ap.parse_args()
    cfg = load_config(args.config)
    print(f"{'mode':<12} {'#data':>6} {'P@1':>7} {'MRR':>7} {'Robust':>7}")
    for mode in args.modes:
        _, robust, run = _run(cfg.with_overrides(seed=args.seed, out_dir=args.out / mode), mode)
        print(f"{mode:<12} {len(run.reformulations):>6} {robust.p_at_1:>7.4f} {robust.mrr:>7.4f} "
              f"{robust.robust:>7.4f}")


if __name__ == "__main__":
    main()
