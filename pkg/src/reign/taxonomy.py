"""Reformulation categories and per-question action masks.

The fifteen categories are frozen in the order rc1..rc15:

    rc1-rc4    insert    entity, relation, entity type, answer type
    rc5-rc8    delete    entity, relation, entity type, answer type
    rc9-rc11   substitute relation, entity type, answer type
    rc12-rc14  substitute entity with pronoun, type, alias
    rc15       retain whole question
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import AnnotatedQuestion, Mention, is_punct
from .kg import KnowledgeGraph, normalize, types_of

OPERATIONS = ("insert", "delete", "substitute", "retain")
OPERANDS = ("entity", "relation", "entity_type", "answer_type", "whole_question")


@dataclass(frozen=True)
class ReformulationCategory:
    id: str
    operation: str
    operand: str
    substitute_mode: Optional[str] = None

    @property
    def index(self) -> int:
        return int(self.id[2:]) - 1

    @property
    def short(self) -> str:
        op = {"insert": "INS", "delete": "DEL", "substitute": "SUBS", "retain": "RETAIN"}[self.operation]
        if self.operation == "retain":
            return op
        name = {"entity": "ent", "relation": "rel", "entity_type": "ent-type", "answer_type": "ans-type"}[self.operand]
        if self.substitute_mode:
            return f"{op} {name} w/ {self.substitute_mode}"
        return f"{op} {name}"

    def __str__(self) -> str:
        return self.id


def _build() -> tuple[ReformulationCategory, ...]:
    cats = []
    parts = ("entity", "relation", "entity_type", "answer_type")
    for op in ("insert", "delete"):
        for operand in parts:
            cats.append((op, operand, None))
    for operand in parts[1:]:
        cats.append(("substitute", operand, None))
    for mode in ("pronoun", "type", "alias"):
        cats.append(("substitute", "entity", mode))
    cats.append(("retain", "whole_question", None))
    return tuple(ReformulationCategory(f"rc{i}", *c) for i, c in enumerate(cats, 1))


CATEGORIES = _build()
N_ACTIONS = len(CATEGORIES)
RETAIN = CATEGORIES[-1]
_BY_ID = {c.id: c for c in CATEGORIES}


def all_categories() -> list[ReformulationCategory]:
    return list(CATEGORIES)


def category(ref) -> ReformulationCategory:
    """Resolve a category from its id ("rc7"), 0-based index, or itself."""
    if isinstance(ref, ReformulationCategory):
        return ref
    if isinstance(ref, (int, np.integer)):
        return CATEGORIES[int(ref)]
    try:
        return _BY_ID[ref]
    except KeyError:
        raise ValueError(f"unknown reformulation category {ref!r}") from None


# Validity rules shared by name with the reformulator, which applies them.

def unused_aliases(kg: KnowledgeGraph, mention: Mention) -> list[str]:
    current = normalize(" ".join(mention.surface))
    seen, out = {current}, []
    for a in kg[mention.item].aliases:
        if normalize(a) not in seen:
            seen.add(normalize(a))
            out.append(a)
    return out


def leaves_content(aq: AnnotatedQuestion, mention: Mention) -> bool:
    """Whether removing the mention keeps at least one non-punctuation token."""
    return any(
        not is_punct(t) for k, t in enumerate(aq.tokens) if not mention.start <= k < mention.end
    )


def _type_mention_items(aq: AnnotatedQuestion) -> set[str]:
    return {m.item for m in aq.mentions if m.role in ("entity_type", "answer_type")}


def valid_actions(aq: AnnotatedQuestion, kg: KnowledgeGraph) -> np.ndarray:
    mask = np.zeros(N_ACTIONS, dtype=np.int8)
    items = aq.mentioned_items()
    by_role = {r: aq.with_role(r) for r in ("entity", "relation", "entity_type", "answer_type")}
    typed_mentions = _type_mention_items(aq)

    mask[0] = any(e not in items for e, _ in aq.history_entities)
    mask[1] = any(r not in items for r, _ in aq.history_relations)
    mask[2] = any(
        t not in typed_mentions for m in by_role["entity"] for t in types_of(kg, m.item)
    )
    mask[3] = not by_role["answer_type"] and any(
        a in kg and types_of(kg, a) for a in (aq.gold or ())
    )
    for k, role in enumerate(("entity", "relation", "entity_type", "answer_type")):
        mask[4 + k] = any(leaves_content(aq, m) for m in by_role[role][:1])
    for k, role in enumerate(("relation", "entity_type", "answer_type")):
        mask[8 + k] = any(unused_aliases(kg, m) for m in by_role[role])
    mask[11] = bool(by_role["entity"])
    mask[12] = any(types_of(kg, m.item) for m in by_role["entity"])
    mask[13] = any(unused_aliases(kg, m) for m in by_role["entity"])
    mask[14] = 1
    return mask
