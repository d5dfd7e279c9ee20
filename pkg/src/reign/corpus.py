"""Benchmark ingestion and question annotation against the KG.

Mentions are found by greedy longest-match over the KG alias index. Linked
predicates become relations, linked types become entity or answer types
depending on the gold answers, and everything else is an entity.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .kg import KnowledgeGraph, is_type, normalize, types_of

ROLES = ("entity", "relation", "entity_type", "answer_type")

_TERMINAL = re.compile(r"^(.*?)([?.!]+)$", re.S)

Tokens = tuple[str, ...]
History = tuple[tuple[Tokens, str], ...]


class BenchmarkError(Exception):
    pass


class ValidationError(BenchmarkError):
    pass


class ContractError(Exception):
    """Raised when a caller breaks an operation's precondition."""


def tokenize(text: str) -> Tokens:
    text = text.strip()
    m = _TERMINAL.match(text)
    if m:
        return tuple(m.group(1).split()) + (m.group(2),)
    return tuple(text.split())


def is_punct(token: str) -> bool:
    return bool(token) and all(c in "?.!" for c in token)


def detokenize(tokens: Sequence[str]) -> str:
    if tokens and is_punct(tokens[-1]):
        return " ".join(tokens[:-1]) + tokens[-1]
    return " ".join(tokens)


@dataclass(frozen=True)
class Turn:
    index: int
    question: Tokens
    gold_answers: tuple[str, ...]
    paraphrases: tuple[Tokens, ...] = ()


@dataclass(frozen=True)
class Conversation:
    id: str
    domain: str
    turns: tuple[Turn, ...]

    def turn(self, index: int) -> Turn:
        if not 1 <= index <= len(self.turns):
            raise ContractError(f"conversation {self.id!r} has no turn {index}")
        return self.turns[index - 1]

    def history(self, kg: KnowledgeGraph, index: int) -> History:
        """Gold history before turn `index`: (question tokens, top gold answer label)."""
        return tuple(
            (t.question, kg[t.gold_answers[0]].label if t.gold_answers[0] in kg else t.gold_answers[0])
            for t in self.turns[: index - 1]
        )


@dataclass(frozen=True)
class Mention:
    span: tuple[int, int]
    surface: Tokens
    item: str
    role: str

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]


@dataclass(frozen=True)
class AnnotatedQuestion:
    conv_id: str
    turn: int
    tokens: Tokens
    mentions: tuple[Mention, ...]
    history: History
    gold: Optional[tuple[str, ...]] = None
    # (item id, surface tokens) in history order, first occurrence only
    history_entities: tuple[tuple[str, Tokens], ...] = ()
    history_relations: tuple[tuple[str, Tokens], ...] = ()

    def with_role(self, role: str) -> list[Mention]:
        return [m for m in self.mentions if m.role == role]

    def mentioned_items(self) -> set[str]:
        return {m.item for m in self.mentions}


def load_benchmark(path) -> list[Conversation]:
    path = Path(path)
    conversations = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                turns = []
                for i, t in enumerate(obj["turns"], 1):
                    answers = tuple(t["answers"])
                    paraphrases = tuple(tokenize(p) for p in t.get("paraphrases", ()))
                    if not answers:
                        raise ValidationError(f"{path}:{lineno}: turn {i} has no gold answers")
                    if len(set(paraphrases)) != len(paraphrases):
                        raise ValidationError(f"{path}:{lineno}: turn {i} has duplicate paraphrases")
                    turns.append(Turn(i, tokenize(t["question"]), answers, paraphrases))
                conversations.append(Conversation(str(obj["id"]), str(obj.get("domain", "")), tuple(turns)))
            except ValidationError:
                raise
            except json.JSONDecodeError as e:
                raise BenchmarkError(f"{path}:{lineno}: {e.msg}") from None
            except (KeyError, TypeError, AttributeError) as e:
                raise BenchmarkError(f"{path}:{lineno}: malformed conversation ({e!r})") from None
    return conversations


def link_spans(kg: KnowledgeGraph, tokens: Sequence[str]) -> list[tuple[int, int, str]]:
    """Greedy longest-match linking: longer spans first, then earlier start,
    then the lexicographically smaller item id. Literals are never linked."""
    candidates = []
    n = len(tokens)
    for i in range(n):
        if is_punct(tokens[i]):
            continue
        for j in range(i + 1, min(n, i + kg.max_surface_tokens) + 1):
            if is_punct(tokens[j - 1]):
                break
            ids = [x for x in kg.lookup(" ".join(tokens[i:j])) if kg[x].kind != "literal"]
            if ids:
                candidates.append((-(j - i), i, min(ids), j))
    candidates.sort()
    taken = [False] * n
    chosen = []
    for _, i, item, j in candidates:
        if any(taken[i:j]):
            continue
        for k in range(i, j):
            taken[k] = True
        chosen.append((i, j, item))
    chosen.sort()
    return chosen


def classify_type_mention(
    kg: KnowledgeGraph,
    mention: Mention,
    annotated_entities: Iterable[str] = (),
    gold_answers: Optional[Iterable[str]] = None,
) -> str:
    if not is_type(kg, mention.item):
        raise ContractError(f"mention {mention.surface!r} does not link to a KG type")
    for a in gold_answers or ():
        if a in kg and mention.item in types_of(kg, a):
            return "answer_type"
    return "entity_type"


def _history_context(kg: KnowledgeGraph, turns: Sequence[Turn]):
    entities: dict[str, Tokens] = {}
    relations: dict[str, Tokens] = {}
    for t in turns:
        for i, j, item in link_spans(kg, t.question):
            kind = kg[item].kind
            if kind == "predicate":
                relations.setdefault(item, tuple(t.question[i:j]))
            elif kind == "entity":
                entities.setdefault(item, tuple(t.question[i:j]))
        for a in t.gold_answers:
            if a in kg and kg[a].kind == "entity":
                entities.setdefault(a, tuple(kg[a].label.split()))
    return tuple(entities.items()), tuple(relations.items())


def _mentions(kg: KnowledgeGraph, tokens: Tokens, gold, history_entities) -> tuple[Mention, ...]:
    spans = link_spans(kg, tokens)
    entity_ids = [item for _, _, item in spans if kg[item].kind == "entity"]
    entity_ids += [e for e, _ in history_entities]
    out = []
    for i, j, item in spans:
        kind = kg[item].kind
        m = Mention((i, j), tuple(tokens[i:j]), item, "entity")
        if kind == "predicate":
            m = replace(m, role="relation")
        elif kind == "type" and is_type(kg, item):
            m = replace(m, role=classify_type_mention(kg, m, entity_ids, gold))
        out.append(m)
    return tuple(out)


def annotate(kg: KnowledgeGraph, conversation: Conversation, turn_index: int) -> AnnotatedQuestion:
    turn = conversation.turn(turn_index)
    prior = conversation.turns[: turn_index - 1]
    h_ent, h_rel = _history_context(kg, prior)
    return AnnotatedQuestion(
        conv_id=conversation.id,
        turn=turn_index,
        tokens=turn.question,
        mentions=_mentions(kg, turn.question, turn.gold_answers, h_ent),
        history=conversation.history(kg, turn_index),
        gold=turn.gold_answers,
        history_entities=h_ent,
        history_relations=h_rel,
    )


def reannotate(kg: KnowledgeGraph, aq: AnnotatedQuestion, tokens: Sequence[str]) -> AnnotatedQuestion:
    """Annotate new tokens (e.g. a reformulation) in the context of `aq`."""
    tokens = tuple(tokens)
    return replace(aq, tokens=tokens, mentions=_mentions(kg, tokens, aq.gold, aq.history_entities))


def annotate_all(kg: KnowledgeGraph, conversations: Iterable[Conversation]) -> list[AnnotatedQuestion]:
    return [annotate(kg, c, t.index) for c in conversations for t in c.turns]


def history_tokens(history: History) -> list[str]:
    out = []
    for q, a in history:
        out.extend(q)
        out.extend(a.split())
    return out


def history_text(history: History) -> str:
    return " ".join(f"{detokenize(q)} {a}" for q, a in history)


def normalize_tokens(tokens: Iterable[str]) -> list[str]:
    return [normalize(t) for t in tokens if not is_punct(t)]
