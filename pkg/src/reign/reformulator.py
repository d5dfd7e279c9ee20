"""Rule-based reformulation generation.

Each category is an edit on the annotated token sequence:

* delete    the first mention of the operand role is removed
* substitute the first qualifying mention is replaced in place (aliases are
            sampled from the KG, entities may become a pronoun or "the <type>")
* insert    answer types and relations go right after the wh-word (or at the
            front), entity types right before their entity, entities at the
            end before the terminal punctuation
* retain    copy
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from .corpus import (
    AnnotatedQuestion,
    ContractError,
    Conversation,
    History,
    Mention,
    Tokens,
    annotate,
    detokenize,
    history_text,
    is_punct,
)
from .kg import KnowledgeGraph, gender_of, types_of
from .taxonomy import (
    CATEGORIES,
    ReformulationCategory,
    category as as_category,
    leaves_content,
    unused_aliases,
    valid_actions,
)

WH_WORDS = frozenset({"who", "what", "when", "where", "which", "whom", "whose", "how"})
PROVENANCES = ("rule", "rule_noisy", "external")


@dataclass(frozen=True)
class Reformulation:
    source: tuple[str, int]
    category: Optional[ReformulationCategory]
    tokens: Tokens
    provenance: str = "rule"
    # output span covering the inserted/substituted tokens; empty for deletions
    edit_span: tuple[int, int] = (0, 0)
    # output token indices that belong to a mention or to the edit
    protected: frozenset = field(default_factory=frozenset)
    # item whose alias was substituted in, for alias-mode edits
    alias_item: Optional[str] = None

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("empty reformulation")

    @property
    def text(self) -> str:
        return detokenize(self.tokens)

    def to_json(self) -> dict:
        return {
            "conv": self.source[0],
            "turn": self.source[1],
            "category": self.category.id if self.category else "completion",
            "text": self.text,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class DistantPair:
    history: str
    question: str
    category: str
    reformulation: str

    def to_json(self) -> dict:
        return {
            "history": self.history,
            "question": self.question,
            "category": self.category,
            "reformulation": self.reformulation,
        }


class GeneratorInterface(Protocol):
    def generate(
        self, history: History, aq: AnnotatedQuestion, category, rng: np.random.Generator
    ) -> Optional[Reformulation]: ...


def wh_position(tokens: Sequence[str]) -> Optional[int]:
    for k, tok in enumerate(tokens):
        low = tok.lower()
        if low in WH_WORDS or low.split("'")[0] in WH_WORDS:
            return k
    return None


def insertion_point(tokens: Sequence[str], operand: str, aq: Optional[AnnotatedQuestion] = None,
                    entity: Optional[Mention] = None) -> int:
    if operand in ("answer_type", "relation"):
        k = wh_position(tokens)
        return 0 if k is None else k + 1
    if operand == "entity_type":
        return entity.start
    return len(tokens) - 1 if tokens and is_punct(tokens[-1]) else len(tokens)


def pronoun_for(kg: KnowledgeGraph, mention: Mention) -> str:
    if len(kg.lookup(" ".join(mention.surface))) > 1:
        return "they"
    return {"male": "he", "female": "she"}.get(gender_of(kg, mention.item), "it")


def _splice(aq: AnnotatedQuestion, start: int, end: int, new: Sequence[str]):
    tokens = aq.tokens[:start] + tuple(new) + aq.tokens[end:]
    shift = len(new) - (end - start)
    protected = set(range(start, start + len(new)))
    for m in aq.mentions:
        for k in range(m.start, m.end):
            if k < start:
                protected.add(k)
            elif k >= end:
                protected.add(k + shift)
    return tokens, (start, start + len(new)), frozenset(protected)


def _first(mentions: Iterable[Mention], pred=lambda m: True) -> Optional[Mention]:
    return next((m for m in mentions if pred(m)), None)


def _pick(options: Sequence, rng: np.random.Generator):
    return options[int(rng.integers(len(options)))]


def apply_category(
    kg: KnowledgeGraph, aq: AnnotatedQuestion, category, rng: np.random.Generator
) -> Optional[Reformulation]:
    """Apply one reformulation category; None when it does not apply to `aq`."""
    cat = as_category(category)
    source = (aq.conv_id, aq.turn)
    op, operand = cat.operation, cat.operand

    if op == "retain":
        protected = frozenset(k for m in aq.mentions for k in range(m.start, m.end))
        return Reformulation(source, cat, aq.tokens, protected=protected)

    if op == "delete":
        m = _first(aq.with_role(operand))
        if m is None or not leaves_content(aq, m):
            return None
        tokens, span, protected = _splice(aq, m.start, m.end, ())
        return Reformulation(source, cat, tokens, edit_span=span, protected=protected)

    if op == "substitute":
        alias_item = None
        if cat.substitute_mode is None or cat.substitute_mode == "alias":
            m = _first(aq.with_role(operand), lambda m: bool(unused_aliases(kg, m)))
            if m is None:
                return None
            new = _pick(unused_aliases(kg, m), rng).split()
            alias_item = m.item
        elif cat.substitute_mode == "type":
            m = _first(aq.with_role("entity"), lambda m: bool(types_of(kg, m.item)))
            if m is None:
                return None
            new = ["the"] + kg[types_of(kg, m.item)[0]].label.split()
        else:
            m = _first(aq.with_role("entity"))
            if m is None:
                return None
            new = [pronoun_for(kg, m)]
        tokens, span, protected = _splice(aq, m.start, m.end, new)
        return Reformulation(source, cat, tokens, edit_span=span, protected=protected,
                             alias_item=alias_item)

    # insert
    items = aq.mentioned_items()
    typed = {m.item for m in aq.mentions if m.role in ("entity_type", "answer_type")}
    anchor = None
    if operand == "entity":
        hit = _first(aq.history_entities, lambda e: e[0] not in items)
        if hit is None:
            return None
        new = hit[1]
    elif operand == "relation":
        hit = _first(aq.history_relations, lambda r: r[0] not in items)
        if hit is None:
            return None
        new = hit[1]
    elif operand == "entity_type":
        for m in aq.with_role("entity"):
            t = next((t for t in types_of(kg, m.item) if t not in typed), None)
            if t is not None:
                anchor, new = m, kg[t].label.split()
                break
        else:
            return None
    else:
        if aq.with_role("answer_type"):
            return None
        t = next((ts[0] for a in (aq.gold or ()) if a in kg for ts in [types_of(kg, a)] if ts), None)
        if t is None:
            return None
        new = kg[t].label.split()
    pos = insertion_point(aq.tokens, operand, aq, anchor)
    tokens, span, protected = _splice(aq, pos, pos, new)
    return Reformulation(source, cat, tokens, edit_span=span, protected=protected)


class RuleGenerator:
    """Rule-based generator over a fixed KG."""

    def __init__(self, kg: KnowledgeGraph):
        self.kg = kg

    def generate(self, history, aq, category, rng):
        return apply_category(self.kg, aq, category, rng)


def noisy_generate(inner: GeneratorInterface, history: History, aq: AnnotatedQuestion, category,
                   rng: np.random.Generator, noise_rate: float, kg: Optional[KnowledgeGraph] = None):
    """Run `inner`, then perturb each token with probability `noise_rate`:
    non-mention tokens may be dropped, a substituted alias may be swapped for
    another alias of the same item. Retained questions are left untouched."""
    if not 0.0 <= noise_rate <= 1.0:
        raise ValueError(f"noise_rate must be in [0, 1], got {noise_rate}")
    ref = inner.generate(history, aq, category, rng)
    if ref is None or noise_rate == 0.0 or ref.category is None or ref.category.operation == "retain":
        return ref

    tokens = list(ref.tokens)
    start, end = ref.edit_span
    swapped = None
    if kg is not None and ref.alias_item is not None and rng.random() < noise_rate:
        current = " ".join(tokens[start:end]).casefold()
        others = [a for a in kg[ref.alias_item].aliases if a.casefold() != current]
        if others:
            swapped = _pick(others, rng).split()

    keep = []
    for k, tok in enumerate(tokens):
        droppable = k not in ref.protected and not is_punct(tok)
        drop = droppable and rng.random() < noise_rate
        keep.append(not drop)
    if not any(keep[k] and not is_punct(tokens[k]) for k in range(len(tokens))):
        # never drop everything: keep the first content token
        first = next(k for k, t in enumerate(tokens) if not is_punct(t))
        keep[first] = True

    out = []
    for k, tok in enumerate(tokens):
        if swapped is not None and k == start:
            out.extend(swapped)
        if swapped is not None and start <= k < end:
            continue
        if keep[k]:
            out.append(tok)
    return replace(ref, tokens=tuple(out), provenance="rule_noisy", edit_span=(0, 0),
                   protected=frozenset())


class NoisyGenerator:
    def __init__(self, inner: GeneratorInterface, noise_rate: float, kg: Optional[KnowledgeGraph] = None):
        self.inner = inner
        self.noise_rate = noise_rate
        self.kg = kg

    def generate(self, history, aq, category, rng):
        return noisy_generate(self.inner, history, aq, category, rng, self.noise_rate, self.kg)


def generator_history(history: History) -> History:
    """First and previous turn only, as fed to the generator."""
    if len(history) <= 2:
        return tuple(history)
    return (history[0], history[-1])


def generate_distant_pairs(kg: KnowledgeGraph, conversations: Iterable[Conversation],
                           rng: np.random.Generator, per_category_cap: int) -> list[DistantPair]:
    buckets: dict[str, list[DistantPair]] = {c.id: [] for c in CATEGORIES}
    for conv in conversations:
        for turn in conv.turns:
            aq = annotate(kg, conv, turn.index)
            mask = valid_actions(aq, kg)
            hist = history_text(generator_history(aq.history))
            for cat in CATEGORIES:
                if not mask[cat.index]:
                    continue
                ref = apply_category(kg, aq, cat, rng)
                if ref is None:
                    raise ContractError(f"{cat.id} masked valid but not applicable to {aq.conv_id}:{aq.turn}")
                buckets[cat.id].append(DistantPair(hist, detokenize(aq.tokens), cat.id, ref.text))
    pairs = []
    for cat in CATEGORIES:
        bucket = buckets[cat.id]
        if len(bucket) > per_category_cap:
            keep = np.sort(rng.choice(len(bucket), size=per_category_cap, replace=False))
            bucket = [bucket[i] for i in keep]
        pairs.extend(bucket)
    order = rng.permutation(len(pairs))
    return [pairs[i] for i in order]
