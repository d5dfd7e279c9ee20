"""Answer-quality metrics (P@1, MRR, Hit@5, Robust) and RCS rewards."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import ContractError, Conversation
from .kg import KnowledgeGraph


def _ids(ranked) -> list[str]:
    if hasattr(ranked, "ids"):
        return ranked.ids
    return [r[0] if isinstance(r, (tuple, list)) else r for r in ranked]


def _gold(gold) -> set:
    gold = set(gold)
    if not gold:
        raise ContractError("gold answer set is empty")
    return gold


def reciprocal_rank(ranked, gold) -> float:
    gold = _gold(gold)
    for rank, i in enumerate(_ids(ranked), 1):
        if i in gold:
            return 1.0 / rank
    return 0.0


def precision_at_1(ranked, gold) -> int:
    gold = _gold(gold)
    ids = _ids(ranked)
    return int(bool(ids) and ids[0] in gold)


def hit_at_5(ranked, gold) -> int:
    gold = _gold(gold)
    return int(any(i in gold for i in _ids(ranked)[:5]))


def mrr(rrs: Iterable[float]) -> float:
    rrs = list(rrs)
    return sum(rrs) / len(rrs) if rrs else 0.0


def reward_extrinsic(ranked_reform, ranked_orig, gold) -> float:
    """Reciprocal-rank difference between the reformulation and the original."""
    return reciprocal_rank(ranked_reform, gold) - reciprocal_rank(ranked_orig, gold)


def reward_intrinsic(qa, history, reform, orig) -> float:
    """Difference in the model's top-1 answer probability."""
    return qa.top1_probability(history, reform) - qa.top1_probability(history, orig)


@dataclass(frozen=True)
class Outcome:
    kind: str
    ranked: tuple[str, ...]
    p_at_1: int
    rr: float
    hit_at_5: int


@dataclass(frozen=True)
class IntentResult:
    intent: tuple[str, int]
    outcomes: tuple[Outcome, ...]
    domain: str = ""

    def __post_init__(self):
        if sum(o.kind == "original" for o in self.outcomes) != 1:
            raise ValueError(f"intent {self.intent} needs exactly one original outcome")


def robust_metric(results: Sequence[IntentResult]) -> float:
    """Mean number of formulations (original included) answered with P@1 = 1."""
    if not results:
        raise ContractError("robust metric over zero intents")
    return sum(sum(o.p_at_1 for o in r.outcomes) for r in results) / len(results)


@dataclass
class MetricsReport:
    p_at_1: float
    mrr: float
    hit_at_5: float
    robust: Optional[float]
    n_intents: int
    n_formulations: int
    by_domain: dict = field(default_factory=dict)
    by_turn: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "p_at_1": self.p_at_1,
            "mrr": self.mrr,
            "hit_at_5": self.hit_at_5,
            "robust": self.robust,
            "n_intents": self.n_intents,
            "n_formulations": self.n_formulations,
            "by_domain": self.by_domain,
            "by_turn": self.by_turn,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def score_formulation(qa, history, tokens, gold, kind: str) -> Outcome:
    ranked = qa.answer(history, tokens)
    return Outcome(kind, tuple(ranked.ids), precision_at_1(ranked, gold),
                   reciprocal_rank(ranked, gold), hit_at_5(ranked, gold))


def evaluate_intents(qa, kg: KnowledgeGraph, conversations: Iterable[Conversation],
                     include_paraphrases: bool) -> list[IntentResult]:
    results = []
    for conv in conversations:
        for turn in conv.turns:
            history = conv.history(kg, turn.index)
            outcomes = [score_formulation(qa, history, turn.question, turn.gold_answers, "original")]
            if include_paraphrases:
                for i, para in enumerate(turn.paraphrases, 1):
                    outcomes.append(score_formulation(qa, history, para, turn.gold_answers, f"paraphrase_{i}"))
            results.append(IntentResult((conv.id, turn.index), tuple(outcomes), conv.domain))
    return results


def summarize(results: Sequence[IntentResult], include_paraphrases: bool) -> MetricsReport:
    outcomes = [o for r in results for o in r.outcomes]
    n = len(outcomes)
    domain = defaultdict(list)
    turn = defaultdict(list)
    for r in results:
        for o in r.outcomes:
            domain[r.domain].append(o.p_at_1)
            turn[str(r.intent[1])].append(o.p_at_1)

    def breakdown(groups):
        return {k: {"p_at_1": sum(v) / len(v), "n_formulations": len(v)} for k, v in sorted(groups.items())}

    return MetricsReport(
        p_at_1=sum(o.p_at_1 for o in outcomes) / n if n else 0.0,
        mrr=mrr(o.rr for o in outcomes),
        hit_at_5=sum(o.hit_at_5 for o in outcomes) / n if n else 0.0,
        robust=robust_metric(results) if include_paraphrases and results else None,
        n_intents=len(results),
        n_formulations=n,
        by_domain=breakdown(domain),
        by_turn=breakdown(turn),
    )


def evaluate(qa, conversations: Iterable[Conversation], include_paraphrases: bool,
             kg: KnowledgeGraph) -> MetricsReport:
    """Answer every formulation of every test intent with the original gold
    history and aggregate the metrics."""
    return summarize(evaluate_intents(qa, kg, conversations, include_paraphrases), include_paraphrases)
