import math
import sys

import pytest
from hypothesis import given, strategies as st

from reign.corpus import ValidationError, tokenize
from reign.qa import (
    HISTORY_WEIGHT,
    MAX_CANDIDATES,
    OverlapQaModel,
    SubprocessQaModel,
    TrainPair,
    TrainingError,
    augment_training_set,
    content_tokens,
    softmax_top1,
    training_pairs,
)
from reign.reformulator import Reformulation
from reign.taxonomy import RETAIN, category

from conftest import TOY_FACTS, TOY_ITEMS, make_conv, make_kg


def oracle_answer(kg, weights, history, question):
    """Plain re-statement of the scoring rule, used as an independent oracle."""
    q = content_tokens(question)
    h = content_tokens([t for qq, a in history for t in list(qq) + a.split()]) - q
    surf = {i: content_tokens(" ".join(it.surfaces).split()) for i, it in kg.items.items()}
    matched = {i for i, toks in surf.items() if toks & (q | h)}
    best = {}
    for f in kg.facts:
        toks = set().union(*(surf[x] for x in f.members() + f.predicates()))
        hit = toks & (q | h)
        if not hit:
            continue
        score = sum(1 + weights.get((t, f.predicate), 0) if t in q else HISTORY_WEIGHT for t in hit)
        for m in f.members():
            if m not in matched:
                best[m] = max(best.get(m, -1), score)
    return sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:MAX_CANDIDATES]


def test_untrained_worked_example(toy_kg):
    qa = OverlapQaModel(toy_kg)
    assert qa.token_weights == {}
    ranked = qa.answer((), tokenize("TROP airing on?"))
    assert ranked.entries[0] == ("E_apv", 2.0)
    # hand score: "trop" and "airing" match the broadcaster fact, "trop" alone the rest
    assert list(ranked.entries) == [("E_apv", 2.0), ("E_baldry", 1.0), ("E_isildur", 1.0),
                                    ("E_payne", 1.0), ("T_tv", 1.0)]


def test_no_overlap_gives_empty_list(toy_kg):
    assert OverlapQaModel(toy_kg).answer((), tokenize("Completely unrelated words?")).entries == ()


def test_ties_broken_by_smaller_id(toy_kg):
    ranked = OverlapQaModel(toy_kg).answer((), tokenize("TROP?"))
    scores = dict(ranked.entries)
    tied = [i for i, s in ranked.entries if s == 1.0]
    assert tied == sorted(tied) and len(tied) > 1
    assert scores["E_apv"] == 1.0


def test_train_worked_example(toy_kg):
    conv = make_conv([("TROP airing on?", ["E_apv"])])
    qa = OverlapQaModel(toy_kg).train(training_pairs(toy_kg, [conv]))
    assert qa.token_weights[("airing", "P449")] == 1
    # the answer's type fact is not linked to a question item
    assert qa.token_weights == {("airing", "P449"): 1.0, ("trop", "P449"): 1.0}


def test_train_empty_and_reset(toy_kg):
    qa = OverlapQaModel(toy_kg).train([])
    assert qa.token_weights == {}
    conv = make_conv([("TROP airing on?", ["E_apv"]), ("Who created it?", ["E_payne"])])
    pairs = training_pairs(toy_kg, [conv])
    first = dict(qa.train(pairs).token_weights)
    assert qa.train(pairs).token_weights == first


def test_train_unknown_gold(toy_kg):
    with pytest.raises(TrainingError):
        OverlapQaModel(toy_kg).train([TrainPair("c", 1, (), tokenize("TROP?"), ("nope",))])


def test_history_weight(toy_kg):
    conv = make_conv([("Network TROP airing on?", ["E_apv"]), ("Who created it?", ["E_payne"])])
    qa = OverlapQaModel(toy_kg)
    hist = conv.history(toy_kg, 2)
    ranked = dict(qa.answer(hist, tokenize("Who created it?")).entries)
    # "created" matches the creator predicate; TROP comes from the history at half weight
    assert ranked["E_payne"] == pytest.approx(1 + HISTORY_WEIGHT)
    assert "E_apv" not in ranked  # matched in the history, so not a candidate


def test_learned_weights_only_apply_to_question_tokens(toy_kg):
    qa = OverlapQaModel(toy_kg, weights={("trop", "P170"): 10.0})
    hist = ((tokenize("TROP?"), "x"),)
    assert dict(qa.answer(hist, tokenize("created by?")).entries)["E_payne"] == 1 + HISTORY_WEIGHT
    assert dict(qa.answer((), tokenize("TROP created by?")).entries)["E_payne"] == 11 + 1


vocab = ["Who", "created", "TROP", "airing", "on", "network", "series", "played", "Isildur",
         "Power", "by", "Maxim", "Amazon", "human"]
q_strategy = st.lists(st.sampled_from(vocab), max_size=6).map(lambda w: tokenize(" ".join(w) + "?"))
weights_strategy = st.dictionaries(
    st.tuples(st.sampled_from([v.lower() for v in vocab]), st.sampled_from(["P449", "P161", "P170", "P31"])),
    st.integers(0, 5).map(float), max_size=6)


@given(q_strategy, q_strategy, weights_strategy)
def test_answer_matches_oracle(question, hist_q, weights):
    kg = make_kg(TOY_ITEMS, TOY_FACTS)
    history = ((hist_q, "Amazon Prime Video"),) if len(hist_q) > 1 else ()
    qa = OverlapQaModel(kg, weights=weights)
    ranked = qa.answer(history, question)
    assert list(ranked.entries) == oracle_answer(kg, weights, history, question)
    scores = [s for _, s in ranked.entries]
    assert scores == sorted(scores, reverse=True)
    assert len(set(ranked.ids)) == len(ranked.ids)
    p = qa.top1_probability(history, question)
    assert 0.0 <= p <= 1.0


def test_top1_probability_uniform():
    assert softmax_top1([2.0, 2.0, 2.0, 2.0]) == pytest.approx(0.25)
    assert softmax_top1([]) == 0.0
    assert softmax_top1([3.0, 1.0], 1.0) == pytest.approx(1 / (1 + math.exp(-2)))


def test_save_load_round_trip(tmp_path, bundled):
    kg, splits = bundled
    qa = OverlapQaModel(kg, smoothing=2.0).train(training_pairs(kg, splits["train"]))
    qa.save(tmp_path / "qa.json")
    back = OverlapQaModel.load(kg, tmp_path / "qa.json")
    assert back.token_weights == qa.token_weights and back.smoothing == 2.0
    q = splits["test"][0].turns[0].question
    assert back.answer((), q) == qa.answer((), q)


def test_augment_training_set(toy_kg):
    conv = make_conv([("TROP airing on?", ["E_apv"]), ("Who created it?", ["E_payne"])])
    base = training_pairs(toy_kg, [conv])
    assert augment_training_set(base, []) == base
    refs = [
        Reformulation(("c1", 1), RETAIN, tokenize("TROP airing on?")),
        Reformulation(("c1", 1), category("rc5"), tokenize("airing on?")),
        Reformulation(("c1", 1), category("rc9"), tokenize("airing on?")),
        Reformulation(("c1", 2), category("rc1"), tokenize("Who created it TROP?")),
    ]
    out = augment_training_set(base, refs)
    assert out[:2] == base
    assert len(out) == 4
    extra = out[2]
    assert extra.question == tokenize("airing on?") and extra.gold == ("E_apv",)
    assert out[3].history == base[1].history
    with pytest.raises(ValidationError):
        augment_training_set(base, [Reformulation(("c9", 1), RETAIN, tokenize("x?"))])


def test_subprocess_adapter_matches_in_process(tmp_path, bundled):
    from reign.config import bundled_data_dir
    kg, splits = bundled
    qa = OverlapQaModel(kg).train(training_pairs(kg, splits["train"]))
    qa.save(tmp_path / "qa.json")
    d = bundled_data_dir()
    cmd = [sys.executable, "-m", "reign.qa_server", "--kg-items", str(d / "kg_items.jsonl"),
           "--kg-facts", str(d / "kg_facts.jsonl"), "--model", str(tmp_path / "qa.json")]
    with SubprocessQaModel(cmd) as ext:
        for conv in splits["test"][:3]:
            for t in conv.turns:
                h = conv.history(kg, t.index)
                assert ext.answer(h, t.question).entries == qa.answer(h, t.question).entries
