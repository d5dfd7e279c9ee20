"""In-memory knowledge graph: items with aliases, SPO facts with qualifiers,
and a normalized alias index used for mention linking."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

KINDS = ("entity", "predicate", "type", "literal")
GENDERS = ("male", "female")
DEFAULT_TYPE_PREDICATE = "P31"

_WS = re.compile(r"\s+")


class KgError(Exception):
    pass


class KgLoadError(KgError):
    pass


class ReferentialIntegrityError(KgLoadError):
    pass


class KgLookupError(KgError, KeyError):
    pass


def normalize(surface: str) -> str:
    """Case-fold and collapse internal whitespace."""
    return _WS.sub(" ", surface.casefold()).strip()


@dataclass(frozen=True)
class KgItem:
    id: str
    label: str
    aliases: tuple[str, ...] = ()
    kind: str = "entity"
    gender: Optional[str] = None

    def __post_init__(self):
        if not self.label:
            raise ValueError(f"item {self.id!r} has an empty label")
        if self.kind not in KINDS:
            raise ValueError(f"item {self.id!r}: unknown kind {self.kind!r}")
        if len(set(self.aliases)) != len(self.aliases):
            raise ValueError(f"item {self.id!r}: duplicate aliases")
        if self.label in self.aliases:
            raise ValueError(f"item {self.id!r}: alias equals label")
        if self.gender is not None:
            if self.kind != "entity":
                raise ValueError(f"item {self.id!r}: gender on non-entity")
            if self.gender not in GENDERS:
                raise ValueError(f"item {self.id!r}: unknown gender {self.gender!r}")

    @property
    def surfaces(self) -> tuple[str, ...]:
        return (self.label,) + self.aliases


@dataclass(frozen=True)
class Fact:
    subject: str
    predicate: str
    object: str
    qualifiers: tuple[tuple[str, str], ...] = ()

    def members(self) -> tuple[str, ...]:
        """Non-predicate items of the fact: subject, object, qualifier objects."""
        return (self.subject, self.object) + tuple(o for _, o in self.qualifiers)

    def predicates(self) -> tuple[str, ...]:
        return (self.predicate,) + tuple(p for p, _ in self.qualifiers)


@dataclass(frozen=True)
class KnowledgeGraph:
    items: Mapping[str, KgItem]
    facts: tuple[Fact, ...]
    type_predicate: str = DEFAULT_TYPE_PREDICATE
    alias_index: Mapping[str, tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self):
        items = MappingProxyType(dict(self.items))
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "facts", tuple(self.facts))
        _check_integrity(items, self.facts, self.type_predicate)

        index: dict[str, list[str]] = {}
        for item_id in sorted(items):
            for surface in items[item_id].surfaces:
                ids = index.setdefault(normalize(surface), [])
                if item_id not in ids:
                    ids.append(item_id)
        object.__setattr__(
            self, "alias_index", MappingProxyType({k: tuple(v) for k, v in index.items()})
        )

        types: dict[str, list[str]] = {}
        type_objects = set()
        for f in self.facts:
            if f.predicate == self.type_predicate:
                types.setdefault(f.subject, []).append(f.object)
                type_objects.add(f.object)
        object.__setattr__(self, "_types", {k: tuple(v) for k, v in types.items()})
        object.__setattr__(self, "_type_objects", frozenset(type_objects))
        object.__setattr__(
            self, "max_surface_tokens", max((len(k.split()) for k in index), default=0)
        )

    def __getitem__(self, item_id: str) -> KgItem:
        try:
            return self.items[item_id]
        except KeyError:
            raise KgLookupError(item_id) from None

    def __contains__(self, item_id: object) -> bool:
        return item_id in self.items

    def lookup(self, surface: str) -> tuple[str, ...]:
        """Item ids whose label or an alias normalizes to `surface`."""
        return self.alias_index.get(normalize(surface), ())


def _check_integrity(items: Mapping[str, KgItem], facts: Sequence[Fact], type_predicate: str):
    for key, item in items.items():
        if key != item.id:
            raise KgLoadError(f"item keyed {key!r} has id {item.id!r}")
    for n, f in enumerate(facts):
        for ref in (f.subject, f.predicate, f.object, *(x for q in f.qualifiers for x in q)):
            if ref not in items:
                raise ReferentialIntegrityError(f"fact {n}: unknown id {ref!r}")
        if items[f.subject].kind != "entity":
            raise ReferentialIntegrityError(f"fact {n}: subject {f.subject!r} is not an entity")
        for p in f.predicates():
            if items[p].kind != "predicate":
                raise ReferentialIntegrityError(f"fact {n}: {p!r} is not a predicate")
    if facts and type_predicate not in items:
        raise ReferentialIntegrityError(f"type predicate {type_predicate!r} not in items")


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise KgLoadError(f"{path}:{lineno}: {e.msg}") from None
            if not isinstance(obj, dict):
                raise KgLoadError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def load_kg(items_path, facts_path, type_predicate: str = DEFAULT_TYPE_PREDICATE) -> KnowledgeGraph:
    items_path, facts_path = Path(items_path), Path(facts_path)
    items: dict[str, KgItem] = {}
    for lineno, obj in _read_jsonl(items_path):
        try:
            item = KgItem(
                id=obj["id"],
                label=obj["label"],
                aliases=tuple(obj.get("aliases", ())),
                kind=obj.get("kind", "entity"),
                gender=obj.get("gender"),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise KgLoadError(f"{items_path}:{lineno}: {e}") from None
        if item.id in items:
            raise KgLoadError(f"{items_path}:{lineno}: duplicate id {item.id!r}")
        items[item.id] = item

    facts = []
    for lineno, obj in _read_jsonl(facts_path):
        try:
            quals = tuple((str(p), str(o)) for p, o in obj.get("qualifiers", ()))
            facts.append(Fact(obj["s"], obj["p"], obj["o"], quals))
        except (KeyError, TypeError, ValueError) as e:
            raise KgLoadError(f"{facts_path}:{lineno}: {e}") from None
    return KnowledgeGraph(items, facts, type_predicate)


def aliases_of(kg: KnowledgeGraph, item_id: str) -> list[str]:
    return list(kg[item_id].aliases)


def types_of(kg: KnowledgeGraph, item_id: str) -> list[str]:
    kg[item_id]
    return list(kg._types.get(item_id, ()))


def is_type(kg: KnowledgeGraph, item_id: str) -> bool:
    kg[item_id]
    return item_id in kg._type_objects


def gender_of(kg: KnowledgeGraph, item_id: str) -> Optional[str]:
    return kg[item_id].gender
