from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from reign.config import bundled_data_dir
from reign.corpus import Conversation, Turn, load_benchmark, tokenize
from reign.kg import Fact, KgItem, KnowledgeGraph, load_kg

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_kg(items, facts=(), type_predicate="P31") -> KnowledgeGraph:
    """items: (id, label, aliases, kind[, gender]); facts: (s, p, o[, qualifiers])."""
    objs = {}
    for row in items:
        iid, label, aliases, kind, *rest = row
        objs[iid] = KgItem(iid, label, tuple(aliases), kind, rest[0] if rest else None)
    fs = [Fact(f[0], f[1], f[2], tuple(f[3]) if len(f) > 3 else ()) for f in facts]
    return KnowledgeGraph(objs, fs, type_predicate)


def make_conv(turns, conv_id="c1", domain="tv") -> Conversation:
    """turns: (question, [gold ids][, [paraphrases]])."""
    out = []
    for i, t in enumerate(turns, 1):
        paras = tuple(tokenize(p) for p in (t[2] if len(t) > 2 else ()))
        out.append(Turn(i, tokenize(t[0]), tuple(t[1]), paras))
    return Conversation(conv_id, domain, tuple(out))


TOY_ITEMS = [
    ("P31", "instance of", [], "predicate"),
    ("P449", "original broadcaster", ["airing on", "broadcaster"], "predicate"),
    ("P161", "cast member", ["played", "portrayed"], "predicate"),
    ("P453", "character role", [], "predicate"),
    ("P170", "creator", ["created by"], "predicate"),
    ("T_tv", "TV series", ["series"], "type"),
    ("T_vss", "video streaming service", ["network"], "type"),
    ("T_human", "human", ["person"], "type"),
    ("E_trop", "The Rings of Power", ["Rings of Power", "TROP"], "entity"),
    ("E_apv", "Amazon Prime Video", [], "entity"),
    ("E_baldry", "Maxim Baldry", [], "entity", "male"),
    ("E_isildur", "Isildur", [], "entity", "male"),
    ("E_payne", "J. D. Payne", [], "entity", "male"),
    ("E_power", "Power", [], "entity"),
]
TOY_FACTS = [
    ("E_trop", "P31", "T_tv"),
    ("E_apv", "P31", "T_vss"),
    ("E_baldry", "P31", "T_human"),
    ("E_payne", "P31", "T_human"),
    ("E_trop", "P449", "E_apv"),
    ("E_trop", "P161", "E_baldry", [("P453", "E_isildur")]),
    ("E_trop", "P170", "E_payne"),
]


@pytest.fixture(scope="session")
def toy_kg() -> KnowledgeGraph:
    return make_kg(TOY_ITEMS, TOY_FACTS)


@pytest.fixture(scope="session")
def bundled():
    d = bundled_data_dir()
    kg = load_kg(d / "kg_items.jsonl", d / "kg_facts.jsonl")
    splits = {s: load_benchmark(d / f"{s}.jsonl") for s in ("train", "dev", "test")}
    return kg, splits


@pytest.fixture(scope="session")
def bundled_kg(bundled):
    return bundled[0]


def find_turn(splits, text):
    from reign.corpus import detokenize
    for convs in splits.values():
        for c in convs:
            for t in c.turns:
                if detokenize(t.question) == text:
                    return c, t
    raise LookupError(text)


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    def record(number: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
