import json

import numpy as np
import pytest

from reign.config import config_from_dict, load_config
from reign.corpus import ValidationError, annotate, tokenize
from reign.kg import KgLoadError
from reign.pipeline import (
    ARTIFACTS,
    PipelineError,
    Run,
    emit_distant_pairs,
    run_ablation,
    run_e2e,
    select_categories,
    stage_rng,
)
from reign.taxonomy import category, valid_actions

from conftest import TOY_FACTS, TOY_ITEMS


@pytest.fixture
def cfg(tmp_path):
    return load_config().with_overrides(out_dir=tmp_path / "run")


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


@pytest.fixture
def toy_files(tmp_path):
    """The toy KG with a corpus whose questions are single mentions."""
    items = [dict(id=r[0], label=r[1], aliases=list(r[2]), kind=r[3], **({"gender": r[4]} if len(r) > 4 else {}))
             for r in TOY_ITEMS]
    facts = [dict(s=f[0], p=f[1], o=f[2], **({"qualifiers": [list(q) for q in f[3]]} if len(f) > 3 else {}))
             for f in TOY_FACTS]
    conv = {"id": "t1", "domain": "tv", "turns": [
        {"question": "TROP?", "answers": ["E_apv"], "paraphrases": ["TROP network?"]},
        {"question": "airing on?", "answers": ["E_apv"]},
    ]}
    paths = {"kg_items": write_jsonl(tmp_path / "items.jsonl", items),
             "kg_facts": write_jsonl(tmp_path / "facts.jsonl", facts)}
    for split in ("train", "dev", "test"):
        paths[split] = write_jsonl(tmp_path / f"{split}.jsonl", [conv])
    return config_from_dict({"data": {k: str(v) for k, v in paths.items()},
                             "out_dir": str(tmp_path / "toyrun"),
                             "dqn": {"h": 8, "d": 32, "epochs": 2, "batch_size": 2}})


def test_e2e_artifacts_and_manifest(cfg):
    orig, robust, manifest = run_e2e(cfg)
    out = cfg.out_dir
    for key, name in ARTIFACTS.items():
        if key != "distant_pairs":
            assert (out / name).is_file(), name
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "ok" and m["seed"] == cfg.seed
    assert set(m["stages"]) == {"load", "train_qa_orig", "train_rcs", "generate", "train_qa_robust",
                                "evaluate_orig", "evaluate_robust"}
    assert list(manifest.stages)[:4] == ["load", "train_qa_orig", "train_rcs", "generate"]
    assert set(m["checksums"]) == {v for k, v in ARTIFACTS.items() if k not in ("manifest", "distant_pairs")}
    assert json.loads((out / "report.robust.json").read_text()) == robust.to_json()
    assert orig.robust is not None and 0 <= orig.p_at_1 <= 1


def test_generated_categories_were_valid(cfg):
    run = Run(cfg)
    run.load()
    run.train_qa_orig()
    run.train_rcs()
    run.generate("top_k")
    masks = {}
    for conv in run.splits["train"]:
        for t in conv.turns:
            masks[(conv.id, t.index)] = valid_actions(annotate(run.kg, conv, t.index), run.kg)
    per_question = {}
    for ref in run.reformulations:
        assert masks[ref.source][category(ref.category).index] == 1
        per_question[ref.source] = per_question.get(ref.source, 0) + 1
    assert max(per_question.values()) <= cfg.k
    lines = run.path("reformulations").read_text().splitlines()
    assert len(lines) == len(run.reformulations)


def test_checkpoint_reuse_never_touches_rewards(cfg, tmp_path, monkeypatch):
    run_e2e(cfg)
    ckpt = cfg.out_dir / "rcs.ckpt.json"

    def boom(self):
        raise AssertionError("reward requested during zero-shot reuse")

    monkeypatch.setattr(Run, "reward_fn", boom)
    other = cfg.with_overrides(out_dir=tmp_path / "zs", rcs_checkpoint=ckpt)
    orig, robust, _ = run_e2e(other)
    assert (tmp_path / "zs" / "rcs.ckpt.json").read_bytes() != b""
    assert (tmp_path / "zs" / "reformulations.jsonl").read_bytes() == (cfg.out_dir / "reformulations.jsonl").read_bytes()


def test_all_cats_size_is_sum_of_valid_counts(cfg):
    run = Run(cfg)
    run.load()
    run.generate("all_cats")
    expected = sum(int(valid_actions(annotate(run.kg, c, t.index), run.kg).sum())
                   for c in run.splits["train"] for t in c.turns)
    assert len(run.reformulations) == expected


def test_random_cats_reproducible(cfg, tmp_path):
    a = run_ablation(cfg, "random_cats")
    first = (cfg.out_dir / "reformulations.jsonl").read_bytes()
    b = run_ablation(cfg.with_overrides(out_dir=tmp_path / "again"), "random_cats")
    assert (tmp_path / "again" / "reformulations.jsonl").read_bytes() == first
    assert a.to_json() == b.to_json()


def test_operation_modes_use_one_operation(cfg):
    run = Run(cfg)
    run.load()
    for mode, op in (("ins_only", "insert"), ("del_only", "delete"), ("subs_only", "substitute")):
        run.generate(mode)
        assert run.reformulations
        assert {category(r.category).operation for r in run.reformulations} == {op}


def test_del_only_without_deletable_mentions(toy_files):
    run = Run(toy_files)
    run.load()
    run.generate("del_only")
    assert run.reformulations == []
    assert run.path("reformulations").read_text() == ""


def test_sample_cats_distinct_and_valid(cfg):
    run = Run(cfg)
    run.load()
    run.train_qa_orig()
    run.train_rcs()
    conv = run.splits["train"][0]
    aq = annotate(run.kg, conv, 1)
    mask = valid_actions(aq, run.kg)
    picks = select_categories("sample_cats", aq, mask, 5, stage_rng(0, 1), run.net, run.encoder)
    assert len(picks) == len(set(picks)) == min(5, int(mask.sum()))
    assert all(mask[category(c).index] for c in picks)
    with pytest.raises(ValueError):
        select_categories("bogus", aq, mask, 5, stage_rng(0, 1))


def test_completion_file(cfg, tmp_path):
    run = Run(cfg)
    run.load()
    rows = [{"conv": c.id, "turn": t.index, "text": "Rewritten question?"}
            for c in run.splits["train"] for t in c.turns]
    good = write_jsonl(tmp_path / "comp.jsonl", rows)
    run.cfg = cfg.with_overrides(completion_file=good)
    run.generate("completion_file")
    assert len(run.reformulations) == len(rows)
    assert {r.provenance for r in run.reformulations} == {"external"}
    run.cfg = cfg.with_overrides(completion_file=write_jsonl(tmp_path / "short.jsonl", rows[:-1]))
    with pytest.raises(ValidationError, match="no rewrite"):
        run.generate("completion_file")
    run.cfg = cfg
    with pytest.raises(ValidationError):
        run.generate("completion_file")


def test_unknown_mode(cfg):
    with pytest.raises(ValidationError):
        run_ablation(cfg, "everything")


def test_distant_pairs(cfg, tmp_path):
    p = emit_distant_pairs(cfg, 3)
    rows = [json.loads(line) for line in p.read_text().splitlines()]
    counts = {}
    for r in rows:
        counts[r["category"]] = counts.get(r["category"], 0) + 1
    assert rows and max(counts.values()) <= 3
    again = emit_distant_pairs(cfg.with_overrides(out_dir=tmp_path / "b"), 3)
    assert again.read_bytes() == p.read_bytes()
    assert emit_distant_pairs(cfg, 0).read_text() == ""
    with pytest.raises(ValidationError):
        emit_distant_pairs(cfg, -1)


def test_stage_failure_is_recorded(cfg):
    run = Run(cfg)
    run.load()
    with pytest.raises(PipelineError) as e:
        run.evaluate("robust")
    assert e.value.stage == "evaluate"
    m = json.loads(run.path("manifest").read_text())
    assert m["status"] == "failed" and m["failed_stage"] == "evaluate_robust"


def test_generate_requires_rcs(cfg):
    run = Run(cfg)
    run.load()
    with pytest.raises(PipelineError, match="train-rcs"):
        run.generate("top_k")


def test_bad_kg_is_an_input_error(cfg, tmp_path):
    bad = tmp_path / "items.jsonl"
    bad.write_text("{not json\n")
    run = Run(cfg.with_overrides(data=type(cfg.data)(**{**vars(cfg.data), "kg_items": bad})))
    with pytest.raises(KgLoadError):
        run.load()
    m = json.loads(run.path("manifest").read_text())
    assert m["failed_stage"] == "load"


def test_stage_rng_independent_streams():
    a = stage_rng(0, 4, 1).random(3)
    assert np.array_equal(a, stage_rng(0, 4, 1).random(3))
    assert not np.array_equal(a, stage_rng(0, 4, 2).random(3))
