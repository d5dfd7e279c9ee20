#!/usr/bin/env python3
"""Build the bundled toy KG and benchmark under src/reign/data.

Five domains, eight topic entities each; every topic yields one three-turn
conversation. Topics are split 4/2/2 per domain into train/dev/test, so the
splits never share a topic entity. Test turns carry five paraphrases built
from templates and surfaces that the training questions do not use.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from reign.corpus import tokenize
from reign.qa import content_tokens

OUT = Path(__file__).resolve().parents[1] / "src" / "reign" / "data"

PREDICATES = {
    "P31": ("instance of", []),
    "P50": ("author", ["written by", "wrote", "writer"]),
    "P57": ("director", ["directed", "directed by", "filmmaker"]),
    "P115": ("home venue", ["stadium", "home ground", "play at", "plays at"]),
    "P118": ("league", ["competes in", "plays in", "play in"]),
    "P161": ("cast member", ["played", "portrayed"]),
    "P166": ("award received", ["won", "earned", "prize won"]),
    "P170": ("creator", ["created by", "created", "creator of", "showrunner"]),
    "P264": ("record label", ["signed to", "label", "record company"]),
    "P272": ("production company", ["produced by", "produced", "studio", "made by"]),
    "P286": ("head coach", ["manager", "coach", "managed by"]),
    "P407": ("language of work", ["written in", "original language"]),
    "P449": ("original broadcaster", ["airing on", "aired on", "broadcast on", "broadcaster"]),
    "P453": ("character role", ["as the character"]),
    "P495": ("country of origin", ["hails from", "hail from", "origin"]),
    "P527": ("has member", ["member", "band member", "members"]),
    "P571": ("inception", ["formation year", "founded", "formed"]),
    "P577": ("publication date", ["published", "release year", "released", "premiered", "first aired"]),
    "P1441": ("present in work", ["appears in", "featured in"]),
}

# type key -> (label, aliases)
TYPES = {
    "tv": ("TV series", ["series", "the series", "show", "TV show"]),
    "band": ("musical group", ["the band", "band", "group"]),
    "book": ("literary work", ["book", "novel", "the novel"]),
    "film": ("film", ["movie", "the movie", "the film"]),
    "club": ("association football club", ["club", "team", "the club"]),
    "human": ("human", ["person", "individual"]),
    "character": ("fictional character", ["character", "hero"]),
    "vss": ("video streaming service", ["network", "streaming service", "platform"]),
    "channel": ("television channel", ["channel", "TV channel"]),
    "business": ("business", ["company", "firm"]),
    "country": ("country", ["nation", "homeland"]),
    "award": ("award", ["prize", "honor"]),
    "language": ("language", ["tongue"]),
    "venue": ("sports venue", ["arena", "ground"]),
    "league": ("sports league", ["competition", "championship"]),
}

# answer entities: key -> (label, aliases, type key, gender)
ANSWERS = {
    "apv": ("Amazon Prime Video", ["Prime Video", "APV"], "vss", None),
    "netflix": ("Netflix", [], "vss", None),
    "hbo": ("HBO", [], "channel", None),
    "amc": ("AMC", [], "channel", None),
    "fx": ("FX", ["FX Networks"], "channel", None),
    "bbc": ("BBC One", ["BBC"], "channel", None),
    "amazon_studios": ("New Line Productions", [], "business", None),
    "mrc": ("Media Rights Capital", ["MRC"], "business", None),
    "sony_tv": ("Sony Pictures", ["SPT"], "business", None),
    "left_bank": ("Left Bank Pictures", ["Left Bank"], "business", None),
    "wiedemann": ("Wiedemann & Berg", [], "business", None),
    "mgm_tv": ("MGM", [], "business", None),
    "warner_tv": ("Warner Bros.", ["WBTV"], "business", None),
    "payne": ("J. D. Payne", ["Payne"], "human", "male"),
    "dubuque": ("Bill Dubuque", ["Dubuque"], "human", "male"),
    "gilligan": ("Vince Gilligan", ["Gilligan"], "human", "male"),
    "morgan": ("Peter Morgan", [], "human", "male"),
    "friese": ("Jantje Friese", ["Friese"], "human", "female"),
    "armstrong": ("Jesse Armstrong", [], "human", "male"),
    "hawley": ("Noah Hawley", ["Hawley"], "human", "male"),
    "joy": ("Lisa Joy", [], "human", "female"),
    "baldry": ("Maxim Baldry", [], "human", "male"),
    "ireland": ("Ireland", ["Republic of Ireland"], "country", None),
    "uk": ("United Kingdom", ["UK", "Britain"], "country", None),
    "sweden": ("Sweden", [], "country", None),
    "usa": ("United States", ["USA", "America"], "country", None),
    "island": ("Island Records", ["Island"], "business", None),
    "parlophone": ("Parlophone", [], "business", None),
    "polar": ("Polar Music", [], "business", None),
    "emi": ("EMI", [], "business", None),
    "elektra": ("Elektra Records", ["Elektra"], "business", None),
    "creation": ("Creation Records", [], "business", None),
    "food": ("Food Records", [], "business", None),
    "bono": ("Bono", ["Paul Hewson"], "human", "male"),
    "edge": ("The Edge", ["David Evans"], "human", "male"),
    "martin": ("Chris Martin", [], "human", "male"),
    "buckland": ("Jonny Buckland", [], "human", "male"),
    "yorke": ("Thom Yorke", ["Yorke"], "human", "male"),
    "greenwood": ("Jonny Greenwood", [], "human", "male"),
    "faltskog": ("Agnetha Faltskog", ["Agnetha"], "human", "female"),
    "lyngstad": ("Anni-Frid Lyngstad", ["Frida"], "human", "female"),
    "mercury": ("Freddie Mercury", ["Mercury"], "human", "male"),
    "may": ("Brian May", [], "human", "male"),
    "hetfield": ("James Hetfield", ["Hetfield"], "human", "male"),
    "ulrich": ("Lars Ulrich", [], "human", "male"),
    "liam": ("Liam Gallagher", [], "human", "male"),
    "noel": ("Noel Gallagher", [], "human", "male"),
    "albarn": ("Damon Albarn", ["Albarn"], "human", "male"),
    "coxon": ("Graham Coxon", [], "human", "male"),
    "updike": ("John Updike", ["Updike"], "human", "male"),
    "tolkien": ("J. R. R. Tolkien", ["Tolkien"], "human", "male"),
    "herbert": ("Frank Herbert", [], "human", "male"),
    "morrison": ("Toni Morrison", ["Morrison"], "human", "female"),
    "austen": ("Jane Austen", ["Austen"], "human", "female"),
    "stoker": ("Bram Stoker", ["Stoker"], "human", "male"),
    "joyce": ("James Joyce", ["Joyce"], "human", "male"),
    "orwell": ("George Orwell", ["Orwell", "Eric Blair"], "human", "male"),
    "pulitzer": ("Pulitzer Fiction", ["Pulitzer"], "award", None),
    "hugo": ("Hugo", ["Hugo Medal"], "award", None),
    "nebula": ("Nebula", [], "award", None),
    "carnegie": ("Carnegie Medal", [], "award", None),
    "english": ("English", ["Anglais"], "language", None),
    "jackson": ("Peter Jackson", [], "human", "male"),
    "cameron": ("James Cameron", [], "human", "male"),
    "spielberg": ("Steven Spielberg", ["Spielberg"], "human", "male"),
    "scott": ("Ridley Scott", [], "human", "male"),
    "mann": ("Michael Mann", [], "human", "male"),
    "curtiz": ("Michael Curtiz", [], "human", "male"),
    "forman": ("Milos Forman", [], "human", "male"),
    "wood": ("Elijah Wood", [], "human", "male"),
    "dicaprio": ("Leonardo DiCaprio", ["DiCaprio"], "human", "male"),
    "worthington": ("Sam Worthington", [], "human", "male"),
    "scheider": ("Roy Scheider", [], "human", "male"),
    "weaver": ("Sigourney Weaver", [], "human", "female"),
    "pacino": ("Al Pacino", ["Pacino"], "human", "male"),
    "bogart": ("Humphrey Bogart", ["Bogart"], "human", "male"),
    "abraham": ("F. Murray Abraham", [], "human", "male"),
    "camp_nou": ("Spotify Camp Nou", ["Camp Nou"], "venue", None),
    "bernabeu": ("Santiago Bernabeu", ["Bernabeu"], "venue", None),
    "anfield": ("Anfield", [], "venue", None),
    "allianz": ("Allianz", [], "venue", None),
    "allianz_turin": ("Stadio delle Alpi", ["Delle Alpi"], "venue", None),
    "ajax_arena": ("De Meer", [], "venue", None),
    "celtic_park": ("Parkhead", [], "venue", None),
    "dragao": ("Estadio do Dragao", ["Dragao"], "venue", None),
    "flick": ("Hansi Flick", [], "human", "male"),
    "ancelotti": ("Carlo Ancelotti", ["Ancelotti"], "human", "male"),
    "slot": ("Arne Slot", [], "human", "male"),
    "kompany": ("Vincent Kompany", ["Kompany"], "human", "male"),
    "motta": ("Thiago Motta", [], "human", "male"),
    "farioli": ("Francesco Farioli", [], "human", "male"),
    "rodgers": ("Brendan Rodgers", [], "human", "male"),
    "anselmi": ("Martin Anselmi", [], "human", "male"),
    "laliga": ("La Liga", ["LaLiga"], "league", None),
    "epl": ("EPL", ["The Prem"], "league", None),
    "bundesliga": ("Bundesliga", [], "league", None),
    "seriea": ("Serie A", [], "league", None),
    "eredivisie": ("Eredivisie", [], "league", None),
    "spfl": ("SPFL", [], "league", None),
    "primeira": ("Liga Portugal", [], "league", None),
}

# Relations per domain: predicate, turn-1 templates (with {ent}), follow-up
# templates (no entity), paraphrase templates. {atype} is the answer type's
# first alias; {ref} in paraphrases is an entity reference (label, alias,
# pronoun, "the <type>") or empty for follow-ups.
RELATIONS = {
    "P449": dict(
        full=["{Atype} {ent} airing on?", "Which {atype} is {ent} airing on?"],
        follow=["{Atype} {etype} airing on?", "Which {atype} is {etype} airing on?"],
        para=["What {atype} broadcast {ref}?", "original broadcaster of {ref}?", "{ref} aired on which {atype}?",
              "Which broadcaster has {ref}?", "{ref} broadcast on?", "On which {atype} was {ref} aired on?"],
    ),
    "P272": dict(
        full=["production company of {ent}?", "Which {atype} produced {ent}?"],
        follow=["production company of {etype}?", "Which {atype} produced {etype}?"],
        para=["{ref} produced by which company?", "studio behind {ref}?", "Which firm made {ref}?",
              "{ref} made by?", "production company behind {ref}?", "Which studio made {ref}?"],
    ),
    "P170": dict(
        full=["Which {atype} is the creator of {ent}?", "creator of {ent}?"],
        follow=["creator of {etype}?", "Which {atype} created {etype}?"],
        para=["Who created {ref}?", "showrunner of {ref}?", "{ref} created by?", "Which person created {ref}?",
              "{ref} showrunner?", "the individual who created {ref}?"],
    ),
    "P577": dict(
        full=["When was {ent} released?", "release year of {etype} {ent}?"],
        follow=["release year of {etype}?", "When was {etype} released?"],
        para=["{ref} first aired when?", "When did {ref} premiere?", "publication date of {ref}?",
              "year {ref} was published?", "{ref} premiered in which year?", "When was {ref} published?"],
    ),
    "P571": dict(
        full=["Formation year of the band {ent}?", "When was {etype} {ent} founded?"],
        follow=["Formation year of {etype}?", "When was {etype} formed?"],
        para=["When was {ref} formed?", "inception of {ref}?", "{ref} founded in?", "year {ref} was founded?",
              "{ref} formed when?", "In which year was {ref} formed?"],
    ),
    "P495": dict(
        full=["country of origin of {ent}?", "Which {atype} does {ent} hail from?"],
        follow=["Which {atype} does {etype} hail from?", "country of origin of {etype}?"],
        para=["{ref} hails from which nation?", "origin of {ref}?", "Where does {ref} hail from?",
              "homeland of {ref}?", "{ref} country of origin?", "Which homeland does {ref} hail from?"],
    ),
    "P264": dict(
        full=["record label of {ent}?", "Which {atype} is {ent} signed to?"],
        follow=["Which {atype} is {etype} signed to?", "record label of {etype}?"],
        para=["{ref} signed to which label?", "record company of {ref}?", "Which firm is {ref} signed to?",
              "label of {ref}?", "{ref} record company?", "What record label is {ref} signed to?"],
    ),
    "P527": dict(
        full=["Which {atype} is a member of {ent}?", "band member of {ent}?"],
        follow=["Which {atype} is a member of {etype}?", "members of {etype}?"],
        para=["members of {ref}?", "Which person is a member of {ref}?", "{ref} band member?", "{ref} has member?",
              "Name a member of {ref}?", "Who are the members of {ref}?"],
    ),
    "P50": dict(
        full=["Which {atype} wrote {ent}?", "author of {etype} {ent}?"],
        follow=["Which {atype} wrote {etype}?", "author of {etype}?"],
        para=["{ref} written by?", "writer of {ref}?", "Which person wrote {ref}?", "Who is the author of {ref}?",
              "{ref} writer?", "Who is the writer of {ref}?"],
    ),
    "P166": dict(
        full=["Which {atype} has {ent} won?", "award received by {etype} {ent}?"],
        follow=["Which {atype} has {etype} won?", "award received by {etype}?"],
        para=["{ref} earned which prize?", "What honor has {ref} won?", "prize won by {ref}?",
              "Which award did {ref} earn?", "{ref} won what?", "award {ref} earned?"],
    ),
    "P407": dict(
        full=["Which {atype} was {ent} written in?", "original language of {etype} {ent}?"],
        follow=["Which {atype} was {etype} written in?", "original language of {etype}?"],
        para=["{ref} written in which tongue?", "language of work of {ref}?", "{ref} original language?",
              "In what language was {ref} written in?", "tongue of {ref}?", "language of {ref}?"],
    ),
    "P57": dict(
        full=["Which {atype} directed {ent}?", "director of {etype} {ent}?"],
        follow=["Which {atype} directed {etype}?", "director of {etype}?"],
        para=["{ref} directed by?", "filmmaker of {ref}?", "Who directed {ref}?", "Who was the director of {ref}?",
              "{ref} filmmaker?", "Which person directed {ref}?"],
    ),
    "P115": dict(
        full=["home venue of {etype} {ent}?", "Which {atype} does {ent} play at?"],
        follow=["Which {atype} does {etype} play at?", "home venue of {etype}?"],
        para=["{ref} stadium?", "home ground of {ref}?", "Where does {ref} play at?", "stadium of {ref}?",
              "{ref} home ground?", "Which ground is the stadium of {ref}?"],
    ),
    "P286": dict(
        full=["Which {atype} is the head coach of {ent}?", "manager of {etype} {ent}?"],
        follow=["Which {atype} is the manager of {etype}?", "head coach of {etype}?"],
        para=["{ref} managed by?", "coach of {ref}?", "Who is the manager of {ref}?",
              "{ref} head coach?", "Who is the coach of {ref}?", "Which person is the head coach of {ref}?"],
    ),
    "P118": dict(
        full=["Which {atype} does {ent} play in?", "league of {etype} {ent}?"],
        follow=["Which {atype} does {etype} play in?", "league of {etype}?"],
        para=["{ref} competes in which competition?", "What championship does {ref} play in?",
              "{ref} plays in?", "league {ref} competes in?", "Which competition has {ref}?", "{ref} league?"],
    ),
}

# domain -> (topic type, relation predicates, topics)
# topic: (label, aliases, gender, {predicate: answer key(s) or literal year})
DOMAINS = {
    "tv_series": ("tv", ["P449", "P272", "P170", "P577"], [
        ("The Rings of Power", ["Rings of Power", "TROP"], None,
         {"P449": "apv", "P272": "amazon_studios", "P170": "payne", "P577": "2022"}),
        ("Ozark", ["Ozarks"], None, {"P449": "netflix", "P272": "mrc", "P170": "dubuque", "P577": "2017"}),
        ("Breaking Bad", ["BB"], None, {"P449": "amc", "P272": "sony_tv", "P170": "gilligan", "P577": "2008"}),
        ("The Crown", ["Crown"], None, {"P449": "netflix", "P272": "left_bank", "P170": "morgan", "P577": "2016"}),
        ("Dark", ["Dunkel"], None, {"P449": "netflix", "P272": "wiedemann", "P170": "friese", "P577": "2017"}),
        ("Succession", ["Succ"], None, {"P449": "hbo", "P272": "warner_tv", "P170": "armstrong", "P577": "2018"}),
        ("Fargo", ["Fargo anthology"], None, {"P449": "fx", "P272": "mgm_tv", "P170": "hawley", "P577": "2014"}),
        ("Westworld", ["WW"], None, {"P449": "hbo", "P272": "warner_tv", "P170": "joy", "P577": "2016"}),
    ]),
    "music": ("band", ["P571", "P495", "P264", "P527"], [
        ("U2", ["U-2"], None, {"P571": "1976", "P495": "ireland", "P264": "island", "P527": ["bono", "edge"]}),
        ("Coldplay", ["Starfish"], None, {"P571": "1997", "P495": "uk", "P264": "parlophone", "P527": ["martin", "buckland"]}),
        ("Radiohead", ["On a Friday"], None, {"P571": "1985", "P495": "uk", "P264": "parlophone", "P527": ["yorke", "greenwood"]}),
        ("ABBA", ["ABBA quartet"], None, {"P571": "1972", "P495": "sweden", "P264": "polar", "P527": ["faltskog", "lyngstad"]}),
        ("Queen", ["Smile"], None, {"P571": "1970", "P495": "uk", "P264": "emi", "P527": ["mercury", "may"]}),
        ("Metallica", ["Alcoholica"], None, {"P571": "1981", "P495": "usa", "P264": "elektra", "P527": ["hetfield", "ulrich"]}),
        ("Oasis", ["The Rain"], None, {"P571": "1991", "P495": "uk", "P264": "creation", "P527": ["liam", "noel"]}),
        ("Blur", ["Seymour"], None, {"P571": "1988", "P495": "uk", "P264": "food", "P527": ["albarn", "coxon"]}),
    ]),
    "books": ("book", ["P50", "P577", "P166", "P407"], [
        ("Rabbit Is Rich", ["Rabbit Rich"], None, {"P50": "updike", "P577": "1981", "P166": "pulitzer", "P407": "english"}),
        ("The Hobbit", ["Hobbit"], None,
         {"P50": "tolkien", "P577": "1937", "P166": "carnegie", "P407": "english"}),
        ("Dune", ["Dune saga"], None, {"P50": "herbert", "P577": "1965", "P166": "hugo", "P407": "english"}),
        ("Beloved", ["Beloved story"], None, {"P50": "morrison", "P577": "1987", "P166": "pulitzer", "P407": "english"}),
        ("Rabbit Redux", ["Redux"], None, {"P50": "updike", "P577": "1971", "P166": "nebula", "P407": "english"}),
        ("Emma", ["Emma story"], None, {"P50": "austen", "P577": "1815", "P166": "carnegie", "P407": "english"}),
        ("Dracula", ["Count Dracula"], None, {"P50": "stoker", "P577": "1897", "P166": "hugo", "P407": "english"}),
        ("Animal Farm", ["Animal Farm fable"], None, {"P50": "orwell", "P577": "1945", "P166": "hugo", "P407": "english"}),
    ]),
    "movies": ("film", ["P57", "P161", "P577"], [
        ("The Fellowship of the Ring", ["Fellowship of the Ring", "LOTR"], None,
         {"P57": "jackson", "P577": "2001", "char": ("Frodo Baggins", ["Frodo", "Ring-bearer"], "male", "wood")}),
        ("Titanic", ["Titanic epic"], None,
         {"P57": "cameron", "P577": "1997", "char": ("Jack Dawson", ["Jack"], "male", "dicaprio")}),
        ("Avatar", ["Avatar Pandora"], None,
         {"P57": "cameron", "P577": "2009", "char": ("Jake Sully", ["Sully"], "male", "worthington")}),
        ("Jaws", ["Jaws shark"], None, {"P57": "spielberg", "P577": "1975", "char": ("Martin Brody", ["Chief Brody"], "male", "scheider")}),
        ("Alien", ["Alien Nostromo"], None,
         {"P57": "scott", "P577": "1979", "char": ("Ellen Ripley", ["Ripley"], "female", "weaver")}),
        ("Heat", ["Heat thriller"], None, {"P57": "mann", "P577": "1995", "char": ("Vincent Hanna", ["Lieutenant Hanna"], "male", "pacino")}),
        ("Casablanca", ["Casablanca classic"], None,
         {"P57": "curtiz", "P577": "1942", "char": ("Rick Blaine", ["Rick"], "male", "bogart")}),
        ("Amadeus", ["Amadeus biopic"], None,
         {"P57": "forman", "P577": "1984", "char": ("Antonio Salieri", ["Salieri"], "male", "abraham")}),
    ]),
    "soccer": ("club", ["P115", "P286", "P571", "P118"], [
        ("Barcelona", ["Barca", "Blaugrana"], None,
         {"P115": "camp_nou", "P286": "flick", "P571": "1899", "P118": "laliga"}),
        ("Real Madrid", ["Los Blancos"], None,
         {"P115": "bernabeu", "P286": "ancelotti", "P571": "1902", "P118": "laliga"}),
        ("Liverpool", ["LFC", "The Reds"], None,
         {"P115": "anfield", "P286": "slot", "P571": "1892", "P118": "epl"}),
        ("Bayern Munich", ["Bayern", "Die Roten"], None,
         {"P115": "allianz", "P286": "kompany", "P571": "1900", "P118": "bundesliga"}),
        ("Juventus", ["Juve", "Old Lady"], None, {"P115": "allianz_turin", "P286": "motta", "P571": "1897", "P118": "seriea"}),
        ("Ajax", ["Ajax Amsterdam"], None, {"P115": "ajax_arena", "P286": "farioli", "P571": "1900", "P118": "eredivisie"}),
        ("Celtic", ["The Bhoys"], None, {"P115": "celtic_park", "P286": "rodgers", "P571": "1887", "P118": "spfl"}),
        ("Porto", ["Dragons"], None, {"P115": "dragao", "P286": "anselmi", "P571": "1893", "P118": "primeira"}),
    ]),
}

# conversations that carry worked examples
FIXED = {"U2": ["P571", "P527", "P495"], "The Rings of Power": ["P449", "P170", "P272"],
         "Ozark": ["P170", "P272", "P577"]}

SPLIT = ("train",) * 4 + ("dev",) * 2 + ("test",) * 2


class Builder:
    def __init__(self):
        self.items: list[dict] = []
        self.facts: list[dict] = []
        self.ids: dict[str, str] = {}
        self._next = 1000

    def _qid(self) -> str:
        self._next += 1
        return f"Q{self._next}"

    def add(self, key, label, aliases=(), kind="entity", gender=None, qid=None):
        if key in self.ids:
            return self.ids[key]
        qid = qid or self._qid()
        obj = {"id": qid, "label": label, "aliases": list(aliases), "kind": kind}
        if gender:
            obj["gender"] = gender
        self.items.append(obj)
        self.ids[key] = qid
        return qid

    def fact(self, s, p, o, qualifiers=()):
        obj = {"s": s, "p": p, "o": o}
        if qualifiers:
            obj["qualifiers"] = [list(q) for q in qualifiers]
        self.facts.append(obj)

    def answer(self, key):
        if key in self.ids:
            return self.ids[key]
        if key.isdigit():
            return self.add(key, key, kind="literal")
        label, aliases, tkey, gender = ANSWERS[key]
        qid = self.add(key, label, aliases, gender=gender)
        self.fact(qid, "P31", self.ids["type:" + tkey])
        return qid


def cap(s: str) -> str:
    return s[:1].upper() + s[1:]


def type_word(rng, tkey: str) -> str:
    label, aliases = TYPES[tkey]
    options = [a for a in [label] + aliases if not a.startswith("the ")]
    return options[int(rng.integers(len(options)))]


def render(template: str, **slots) -> str:
    atype = slots.get("atype", "")
    text = template.format(Atype=cap(atype), **slots)
    return cap(" ".join(text.split()).replace(" ?", "?"))


def pronoun(gender, plural=False):
    if plural:
        return "they"
    return {"male": "he", "female": "she"}.get(gender, "it")


def paraphrases(rng, rel, question, refs, atype, n=5):
    """n distinct paraphrases of one intent, none equal to the question."""
    out = []
    templates = list(RELATIONS[rel]["para"])
    order = rng.permutation(len(templates))
    attempts = 0
    while len(out) < n:
        t = templates[order[attempts % len(templates)]]
        ref = refs[int(rng.integers(len(refs)))]
        text = render(t, ref=ref, atype=atype)
        attempts += 1
        if text != question and text not in out:
            out.append(text)
        if attempts > 200:
            raise RuntimeError(f"cannot build {n} paraphrases for {question!r}")
    return out


def build(seed: int):
    rng = np.random.default_rng(seed)
    b = Builder()
    for pid, (label, aliases) in PREDICATES.items():
        b.add(pid, label, aliases, kind="predicate", qid=pid)
    for key, (label, aliases) in TYPES.items():
        b.add("type:" + key, label, aliases, kind="type")

    splits = {"train": [], "dev": [], "test": []}
    n = 0
    for domain, (tkey, rels, topics) in DOMAINS.items():
        tlabel, taliases = TYPES[tkey]
        order = rng.permutation(len(topics))
        for rank, ti in enumerate(order):
            label, aliases, gender, topic_def = topics[ti]
            split = SPLIT[rank]
            topic = b.add(label, label, aliases, gender=gender)
            b.fact(topic, "P31", b.ids["type:" + tkey])
            gold = {}
            for p in rels:
                if p == "P161":
                    continue
                targets = topic_def[p] if isinstance(topic_def[p], list) else [topic_def[p]]
                gold[p] = [b.answer(t) for t in targets]
                for o in gold[p]:
                    b.fact(topic, p, o)
            char = None
            if "char" in topic_def:
                clabel, caliases, cgender, actor = topic_def["char"]
                char = b.add(clabel, clabel, caliases, gender=cgender)
                b.fact(char, "P31", b.ids["type:character"])
                actor_id = b.answer(actor)
                b.fact(char, "P161", actor_id)
                b.fact(char, "P1441", topic)
                gold["P161"] = [actor_id]

            if label == "The Rings of Power":
                isildur = b.add("Isildur", "Isildur", gender="male")
                b.fact(isildur, "P31", b.ids["type:character"])
                b.fact(topic, "P161", b.answer("baldry"), [("P453", isildur)])
            n += 1
            surfaces = [label] + list(aliases)
            if domain == "movies":
                seq = ["P57", "P161", "P577"]
            elif label in FIXED:
                seq = FIXED[label]
            else:
                seq = [rels[k] for k in rng.permutation(len(rels))[:3]]
            turns = []
            for k, p in enumerate(seq):
                akey = topic_def[p] if p != "P161" else topic_def["char"][3]
                akey = akey[0] if isinstance(akey, list) else akey
                atype = "year" if akey.isdigit() else type_word(rng, ANSWERS[akey][2])
                etype = "the " + type_word(rng, tkey)
                ent = surfaces[int(rng.integers(len(surfaces)))] if k == 0 else ""
                if label == "The Rings of Power" and k == 0:
                    question = "Network TROP airing on?"
                elif label == "U2" and k == 0:
                    question = "Formation year of the band U2?"
                elif label == "Ozark" and k > 0 and p == "P272":
                    question = "production company of the series?"
                elif p == "P161":
                    question = f"Who played {topic_def['char'][0]}?"
                elif k == 0 or rng.random() < 0.5:
                    ent = ent or surfaces[int(rng.integers(len(surfaces)))]
                    tpl = RELATIONS[p]["full"][int(rng.integers(2))]
                    question = render(tpl, ent=ent, atype=atype, etype=etype)
                else:
                    tpl = RELATIONS[p]["follow"][int(rng.integers(2))]
                    question = render(tpl, atype=atype, etype=etype)
                turn = {"question": question, "answers": gold[p]}
                if split == "test":
                    if p == "P161":
                        clabel, caliases, cgender, _ = topic_def["char"]
                        turn["paraphrases"] = char_paraphrases(rng, clabel, caliases, cgender, label)
                    else:
                        plural = tkey == "band"
                        refs = surfaces + [f"the {a}" for a in taliases if not a.startswith("the ")]
                        if k > 0:
                            refs = refs + [pronoun(gender, plural), f"the {tlabel}"]
                        turn["paraphrases"] = paraphrases(rng, p, question, refs, atype)
                turns.append(turn)
            splits[split].append({"id": f"{domain}-{n:02d}", "domain": domain, "turns": turns})
    return b, splits


def char_paraphrases(rng, clabel, caliases, gender, film):
    forms = [
        "Who portrayed {c}?", "{c} was played by whom?", "Which actor portrayed {c} in {f}?",
        "cast member who played {c}?", "Who played the character {c}?", "{c} portrayed by?",
        "Which person played {c} in the movie?",
    ]
    names = [clabel] + list(caliases)
    out = []
    for k in rng.permutation(len(forms)):
        c = names[int(rng.integers(len(names)))]
        text = render(forms[k], c=c, f=film)
        if text not in out and text != f"Who played {clabel}?":
            out.append(text)
        if len(out) == 5:
            return out
    raise RuntimeError(f"cannot paraphrase the {clabel} question")


# kept verbatim from the worked examples even though they overlap type words
WORKED_EXAMPLE_LABELS = {"Amazon Prime Video"}


def _surface_tokens(item) -> set[str]:
    return set().union(*(content_tokens(tokenize(x)) for x in [item["label"]] + item["aliases"]))


def lint(b: Builder, splits) -> list[str]:
    """Token collisions that would make the overlap model degenerate.

    An entity surface must not contain a type or relation word, and a gold
    answer must share no token with its question or the preceding turns,
    since matched items are never answer candidates.
    """
    by_id = {it["id"]: it for it in b.items}
    schema = set().union(*(_surface_tokens(it) for it in b.items if it["kind"] in ("type", "predicate")))
    problems = []
    for it in b.items:
        if it["kind"] in ("entity", "literal") and it["label"] not in WORKED_EXAMPLE_LABELS:
            clash = _surface_tokens(it) & schema
            if clash:
                problems.append(f"{it['label']!r} uses schema words {sorted(clash)}")
    for convs in splits.values():
        for conv in convs:
            seen: set[str] = set()
            for turn in conv["turns"]:
                gold = set().union(*(_surface_tokens(by_id[a]) for a in turn["answers"]))
                for text in [turn["question"]] + turn.get("paraphrases", []):
                    clash = gold & (seen | content_tokens(tokenize(text)))
                    if clash:
                        problems.append(f"{conv['id']} {text!r}: gold shares {sorted(clash)}")
                seen |= content_tokens(tokenize(turn["question"]))
                seen |= gold
    return problems


def write_jsonl(path: Path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=OUT)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    b, splits = build(args.seed)
    problems = lint(b, splits)
    if problems:
        raise SystemExit("benchmark lint failed:\n  " + "\n  ".join(problems))
    args.out.mkdir(parents=True, exist_ok=True)
    write_jsonl(args.out / "kg_items.jsonl", b.items)
    write_jsonl(args.out / "kg_facts.jsonl", b.facts)
    for name, convs in splits.items():
        write_jsonl(args.out / f"{name}.jsonl", convs)
    sizes = {k: len(v) for k, v in splits.items()}
    print(f"{len(b.items)} items, {len(b.facts)} facts, conversations {sizes}")


if __name__ == "__main__":
    main()
