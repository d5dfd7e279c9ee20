"""Command-line entry point: ``reign <command> [--config C] [--seed N] [--out DIR]``.

Exit codes: 0 success, 2 invalid input (config, KG or benchmark), 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .kg import KgLoadError
from .corpus import BenchmarkError
from .pipeline import MODES, PipelineError, Run, emit_distant_pairs, run_e2e

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 2, 3


def _common(default=None) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=default, help="YAML config (default: bundled toy config)")
    p.add_argument("--seed", type=int, default=default, help="override the config seed")
    p.add_argument("--out", type=Path, default=default, help="override the output directory")
    return p


def build_parser() -> argparse.ArgumentParser:
    # subcommand copies must not overwrite flags given before the subcommand
    common = _common(argparse.SUPPRESS)
    ap = argparse.ArgumentParser(prog="reign", description=__doc__.splitlines()[0], parents=[_common()])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("train-qa", parents=[common], help="train QA_orig on the train split")
    sub.add_parser("train-rcs", parents=[common], help="train the category selector on dev")
    aug = sub.add_parser("augment", parents=[common], help="generate reformulations and train QA_robust")
    aug.add_argument("--rcs-checkpoint", type=Path, help="reuse a trained selector")
    aug.add_argument("--mode", choices=MODES, default="top_k")
    ev = sub.add_parser("evaluate", parents=[common], help="evaluate a trained model on test")
    ev.add_argument("--model", choices=("orig", "robust"), required=True)
    ev.add_argument("--paraphrases", action="store_true", help="also score test paraphrases")
    e2e = sub.add_parser("e2e", parents=[common], help="run every stage")
    e2e.add_argument("--rcs-checkpoint", type=Path, help="reuse a trained selector")
    dp = sub.add_parser("distant-pairs", parents=[common], help="write rule-generated training pairs")
    dp.add_argument("--cap", type=int, help="per-category cap (default: from config)")
    return ap


def _config(args):
    cfg = load_config(args.config)
    kw = {}
    if getattr(args, "rcs_checkpoint", None) is not None:
        kw["rcs_checkpoint"] = args.rcs_checkpoint
    cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out, **kw)
    cfg.check_paths()
    return cfg


def _dispatch(args) -> None:
    cfg = _config(args)
    if args.command == "e2e":
        orig, robust, manifest = run_e2e(cfg)
        print(json.dumps({"orig": orig.to_json(), "robust": robust.to_json()}, indent=2, sort_keys=True))
        return
    if args.command == "distant-pairs":
        print(emit_distant_pairs(cfg, args.cap))
        return
    run = Run(cfg)
    run.load()
    if args.command == "train-qa":
        run.train_qa_orig()
        print(run.path("qa_orig"))
    elif args.command == "train-rcs":
        run.train_rcs()
        print(run.path("rcs"))
    elif args.command == "augment":
        run.generate(args.mode)
        run.train_qa_robust()
        print(f"{len(run.reformulations)} reformulations -> {run.path('qa_robust')}")
    elif args.command == "evaluate":
        report = run.evaluate(args.model, paraphrases=args.paraphrases)
        print(report.dumps(), end="")
    run.finish()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except (BenchmarkError, KgLoadError) as e:
        print(f"reign: invalid input: {e}", file=sys.stderr)
        return EXIT_INVALID
    except PipelineError as e:
        print(f"reign: {e}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
