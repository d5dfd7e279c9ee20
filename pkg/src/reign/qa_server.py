"""Serve a trained OverlapQaModel over stdin/stdout in the line-delimited JSON
protocol that SubprocessQaModel speaks.

    python -m reign.qa_server --kg-items I --kg-facts F --model qa_orig.json
"""
from __future__ import annotations

import argparse
import json
import sys

from .corpus import tokenize
from .kg import load_kg
from .qa import OverlapQaModel


def handle(model: OverlapQaModel, line: str) -> dict:
    req = json.loads(line)
    history = tuple((tuple(tokenize(q)), a) for q, a in req.get("history", ()))
    ranked = model.answer(history, tokenize(req["question"]))
    return {"ranked": [[i, s] for i, s in ranked.entries]}


def serve(model: OverlapQaModel, stdin=sys.stdin, stdout=sys.stdout) -> None:
    for line in stdin:
        if not line.strip():
            continue
        try:
            resp = handle(model, line)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            resp = {"ranked": [], "error": f"{type(e).__name__}: {e}"}
        stdout.write(json.dumps(resp) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kg-items", required=True)
    ap.add_argument("--kg-facts", required=True)
    ap.add_argument("--model", required=True, help="qa_*.json written by the pipeline")
    ap.add_argument("--type-predicate", default="P31")
    args = ap.parse_args(argv)
    kg = load_kg(args.kg_items, args.kg_facts, args.type_predicate)
    serve(OverlapQaModel.load(kg, args.model))
    return 0


if __name__ == "__main__":
    sys.exit(main())
