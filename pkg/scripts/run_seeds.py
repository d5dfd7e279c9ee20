#!/usr/bin/env python3
"""Run the end-to-end pipeline over several seeds and print mean metrics of
QA_orig and QA_robust on the paraphrase test set."""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from reign.config import load_config
from reign.pipeline import run_e2e


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--out", type=Path, default=Path("runs/seeds"))
    args = ap.parse_args()
    cfg = load_config(args.config)
    rows = []
    t0 = time.perf_counter()
    for seed in args.seeds:
        orig, robust, _ = run_e2e(cfg.with_overrides(seed=seed, out_dir=args.out / f"seed{seed}"))
        rows.append((orig.p_at_1, robust.p_at_1, orig.robust, robust.robust))
        print(f"seed {seed}: P@1 {orig.p_at_1:.4f} -> {robust.p_at_1:.4f}   "
              f"Robust {orig.robust:.4f} -> {robust.robust:.4f}")
    m = np.mean(rows, axis=0)
    print(f"mean:   P@1 {m[0]:.4f} -> {m[1]:.4f}   Robust {m[2]:.4f} -> {m[3]:.4f}   "
          f"({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
