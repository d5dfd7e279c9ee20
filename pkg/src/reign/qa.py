"""ConvQA model contract, a lexical-overlap reference model, and the
augmentation of training pairs with reformulations."""
from __future__ import annotations

import json
import math
import subprocess
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .corpus import (
    Conversation,
    History,
    Tokens,
    ValidationError,
    detokenize,
    history_tokens,
    is_punct,
)
from .kg import KnowledgeGraph, normalize

MAX_CANDIDATES = 50
HISTORY_WEIGHT = 0.5

# Function words never count as evidence for a fact.
STOPWORDS = frozenset(
    """a an the of by in on at to for from with and or as is are was were be been
    did does do has have had it its he she they him her his their this that these those
    who whom whose what when where which how and's 's""".split()
)


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class RankedAnswerList:
    entries: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in ranked list")
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("ranked list scores must be non-increasing")

    @property
    def ids(self) -> list[str]:
        return [i for i, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TrainPair:
    conv: str
    turn: int
    history: History
    question: Tokens
    gold: tuple[str, ...]


class ConvQaInterface(Protocol):
    def answer(self, history: History, question: Sequence[str]) -> RankedAnswerList: ...

    def train(self, pairs: Iterable[TrainPair]): ...

    def top1_probability(self, history: History, question: Sequence[str]) -> float: ...


def softmax_top1(scores: Sequence[float], temperature: float = 1.0) -> float:
    if not scores:
        return 0.0
    top = max(scores)
    z = sum(math.exp((s - top) / temperature) for s in scores)
    return math.exp((scores[0] - top) / temperature) / z


def content_tokens(tokens: Iterable[str]) -> set[str]:
    out = set()
    for t in tokens:
        if is_punct(t):
            continue
        t = normalize(t).strip("?.!,;:\"")
        if t and t not in STOPWORDS:
            out.add(t)
    return out


class OverlapQaModel:
    """Ranks KG items by token overlap between the question (and, at half
    weight, the history) and the surface forms of facts they take part in.

    Each matched question token contributes ``1 + weight[(token, predicate)]``
    and each matched history token a flat ``HISTORY_WEIGHT``: weights are
    counts learned from question tokens only, so history resolves the topic
    but cannot outvote the current question. An answer's score is the best
    score over the facts it appears in.
    """

    def __init__(self, kg: KnowledgeGraph, smoothing: float = 1.0, weights=None):
        if smoothing <= 0:
            raise ValueError("smoothing must be positive")
        self.kg = kg
        self.smoothing = float(smoothing)
        self.token_weights: dict[tuple[str, str], float] = dict(weights or {})

        self._item_tokens = {
            i: frozenset(content_tokens(" ".join(it.surfaces).split())) for i, it in kg.items.items()
        }
        self._fact_tokens = []
        self._facts_by_token = defaultdict(list)
        self._facts_by_member = defaultdict(list)
        for n, f in enumerate(kg.facts):
            toks = set()
            for x in f.members() + f.predicates():
                toks |= self._item_tokens[x]
            self._fact_tokens.append(frozenset(toks))
            for t in toks:
                self._facts_by_token[t].append(n)
            for m in set(f.members()):
                self._facts_by_member[m].append(n)

    def _query(self, history: History, question: Sequence[str]):
        q = content_tokens(question)
        h = content_tokens(history_tokens(history)) - q
        return q, h

    def answer(self, history: History, question: Sequence[str]) -> RankedAnswerList:
        q, h = self._query(history, question)
        query = q | h
        if not query:
            return RankedAnswerList()
        facts = sorted({n for t in query for n in self._facts_by_token.get(t, ())})
        best: dict[str, float] = {}
        matched_cache: dict[str, bool] = {}
        for n in facts:
            f = self.kg.facts[n]
            score = 0.0
            for t in sorted(self._fact_tokens[n] & query):
                if t in q:
                    score += 1.0 + self.token_weights.get((t, f.predicate), 0.0)
                else:
                    score += HISTORY_WEIGHT
            for m in f.members():
                if m not in matched_cache:
                    matched_cache[m] = bool(self._item_tokens[m] & query)
                if matched_cache[m]:
                    continue
                if score > best.get(m, -1.0):
                    best[m] = score
        ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:MAX_CANDIDATES]
        return RankedAnswerList(tuple(ranked))

    def top1_probability(self, history: History, question: Sequence[str]) -> float:
        ranked = self.answer(history, question)
        return softmax_top1([s for _, s in ranked.entries], self.smoothing)

    def train(self, pairs: Iterable[TrainPair]) -> "OverlapQaModel":
        self.token_weights = {}
        weights: dict[tuple[str, str], float] = defaultdict(float)
        for pair in pairs:
            for g in pair.gold:
                if g not in self.kg:
                    raise TrainingError(f"unknown gold answer {g!r} in {pair.conv}:{pair.turn}")
            q, h = self._query(pair.history, pair.question)
            query = q | h
            for g in pair.gold:
                for n in self._facts_by_member.get(g, ()):
                    f = self.kg.facts[n]
                    # types are answer-type cues, not the item a question is about
                    linked = any(
                        m != g and self.kg[m].kind != "type" and self._item_tokens[m] & query
                        for m in f.members()
                    )
                    if not linked:
                        continue
                    for t in q & self._fact_tokens[n]:
                        weights[(t, f.predicate)] += 1.0
        self.token_weights = dict(weights)
        return self

    def to_json(self) -> dict:
        return {
            "smoothing": self.smoothing,
            "weights": [[t, p, v] for (t, p), v in sorted(self.token_weights.items())],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, kg: KnowledgeGraph, obj: dict) -> "OverlapQaModel":
        weights = {(t, p): float(v) for t, p, v in obj.get("weights", ())}
        return cls(kg, smoothing=obj.get("smoothing", 1.0), weights=weights)

    @classmethod
    def load(cls, kg: KnowledgeGraph, path) -> "OverlapQaModel":
        return cls.from_json(kg, json.loads(Path(path).read_text(encoding="utf-8")))


class SubprocessQaModel:
    """Adapter for an external ConvQA model speaking line-delimited JSON on
    stdin/stdout: ``{"history": [[q, a], ...], "question": str}`` in,
    ``{"ranked": [[id, score], ...]}`` out."""

    def __init__(self, command: Sequence[str], smoothing: float = 1.0):
        self.smoothing = smoothing
        self._proc = subprocess.Popen(
            list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )

    def answer(self, history: History, question: Sequence[str]) -> RankedAnswerList:
        req = {"history": [[detokenize(q), a] for q, a in history], "question": detokenize(question)}
        self._proc.stdin.write(json.dumps(req) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise RuntimeError("external QA process closed its output")
        ranked = json.loads(line)["ranked"]
        return RankedAnswerList(tuple((str(i), float(s)) for i, s in ranked))

    def top1_probability(self, history: History, question: Sequence[str]) -> float:
        return softmax_top1([s for _, s in self.answer(history, question).entries], self.smoothing)

    def train(self, pairs):
        raise NotImplementedError("external models are trained out of band")

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def training_pairs(kg: KnowledgeGraph, conversations: Iterable[Conversation]) -> list[TrainPair]:
    return [
        TrainPair(c.id, t.index, c.history(kg, t.index), t.question, t.gold_answers)
        for c in conversations
        for t in c.turns
    ]


def augment_training_set(train_pairs: Sequence[TrainPair], reformulations) -> list[TrainPair]:
    """Originals plus one pair per reformulation, carrying the original gold
    answers and history. Exact duplicate questions of a turn are dropped."""
    by_source = {(p.conv, p.turn): p for p in train_pairs}
    seen = {(p.conv, p.turn, tuple(p.question)) for p in train_pairs}
    out = list(train_pairs)
    for ref in reformulations:
        key = tuple(ref.source)
        if key not in by_source:
            raise ValidationError(f"reformulation source {key} not in training pairs")
        orig = by_source[key]
        sig = (orig.conv, orig.turn, tuple(ref.tokens))
        if sig in seen:
            continue
        seen.add(sig)
        out.append(TrainPair(orig.conv, orig.turn, orig.history, tuple(ref.tokens), orig.gold))
    return out
