"""End-to-end orchestration: QA_orig, RCS on dev, category selection and
generation on train, QA_robust, evaluation on test.

Artifacts in ``out_dir``:

    qa_orig.json          QA_orig state
    rcs.ckpt.json         RCS network
    reformulations.jsonl  generated training reformulations
    qa_robust.json        QA_robust state
    report.orig.json      metrics of QA_orig on test
    report.robust.json    metrics of QA_robust on test
    manifest.json         config snapshot, versions, timings, checksums
"""
from __future__ import annotations

import hashlib
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import PipelineConfig
from .corpus import (
    AnnotatedQuestion,
    BenchmarkError,
    ContractError,
    Conversation,
    ValidationError,
    annotate,
    load_benchmark,
    tokenize,
)
from .evaluation import MetricsReport, evaluate, reward_extrinsic, reward_intrinsic
from .kg import KgLoadError, KnowledgeGraph, load_kg
from .qa import OverlapQaModel, augment_training_set, training_pairs
from .rcs import (
    HASH_VERSION,
    HashedBowEncoder,
    QNetwork,
    boltzmann_probabilities,
    load_checkpoint,
    q_values,
    save_checkpoint,
    top_k_categories,
    train_rcs,
)
from .reformulator import NoisyGenerator, Reformulation, RuleGenerator, generate_distant_pairs
from .taxonomy import CATEGORIES, category as as_category, valid_actions

MODES = ("top_k", "all_cats", "random_cats", "sample_cats", "ins_only", "del_only", "subs_only",
         "completion_file")
_OPERATION_MODES = {"ins_only": "insert", "del_only": "delete", "subs_only": "substitute"}

ARTIFACTS = {
    "qa_orig": "qa_orig.json",
    "rcs": "rcs.ckpt.json",
    "reformulations": "reformulations.jsonl",
    "qa_robust": "qa_robust.json",
    "report_orig": "report.orig.json",
    "report_robust": "report.robust.json",
    "distant_pairs": "distant_pairs.jsonl",
    "manifest": "manifest.json",
}


# bad inputs keep their type so callers can tell them from stage failures
INPUT_ERRORS = (BenchmarkError, KgLoadError)


class PipelineError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def stage_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream per (stage, task) so results do not depend on order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    config: dict
    seed: int
    versions: dict
    stages: dict = field(default_factory=dict)
    checksums: dict = field(default_factory=dict)
    status: str = "running"
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    partial: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "versions": self.versions,
            "stages": self.stages,
            "checksums": self.checksums,
            "status": self.status,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "partial": self.partial,
        }

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def versions() -> dict:
    return {"reign": __version__, "numpy": np.__version__, "python": platform.python_version(),
            "encoder": HASH_VERSION}


# -- category selection -----------------------------------------------------

def select_categories(mode: str, aq: AnnotatedQuestion, mask, k: int, rng: np.random.Generator,
                      net: Optional[QNetwork] = None, encoder=None, tau: float = 0.3) -> list[str]:
    """Category ids to apply to one training question under `mode`."""
    valid = [c for c in CATEGORIES if mask[c.index]]
    if mode == "top_k":
        return top_k_categories(net, encoder, aq, mask, k)
    if mode == "all_cats":
        return [c.id for c in valid]
    if mode == "random_cats":
        pick = rng.choice(len(valid), size=min(k, len(valid)), replace=False)
        return [valid[i].id for i in pick]
    if mode == "sample_cats":
        q = q_values(net, encoder.encode(aq.tokens, aq.history), mask)
        remaining = np.array(mask, dtype=np.int8)
        out = []
        for _ in range(min(k, len(valid))):
            p = boltzmann_probabilities(q, remaining, tau)
            a = int(rng.choice(len(p), p=p))
            out.append(CATEGORIES[a].id)
            remaining[a] = 0
        return out
    if mode in _OPERATION_MODES:
        return [c.id for c in valid if c.operation == _OPERATION_MODES[mode]]
    raise ValueError(f"unknown selection mode {mode!r}")


# -- run --------------------------------------------------------------------

class Run:
    """One pipeline run over a config; stages can be invoked individually."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.manifest = RunManifest(cfg.to_json(), cfg.seed, versions())
        self.kg: Optional[KnowledgeGraph] = None
        self.splits: dict[str, list[Conversation]] = {}
        self.qa_orig: Optional[OverlapQaModel] = None
        self.qa_robust: Optional[OverlapQaModel] = None
        self.net: Optional[QNetwork] = None
        self.encoder = None
        self.reformulations: list[Reformulation] = []

    def path(self, name: str) -> Path:
        return self.out / ARTIFACTS[name]

    def _stage(self, name: str, fn, *args):
        t0 = time.perf_counter()
        try:
            result = fn(*args)
        except (PipelineError, *INPUT_ERRORS) as e:
            self._fail(name, e)
            raise
        except Exception as e:
            self._fail(name, e)
            raise PipelineError(name, f"{type(e).__name__}: {e}") from e
        self.manifest.stages[name] = round(time.perf_counter() - t0, 6)
        return result

    def _fail(self, name: str, e):
        self.manifest.status = "failed"
        self.manifest.failed_stage = name
        self.manifest.error = None if e is None else f"{type(e).__name__}: {e}"
        self.manifest.partial = sorted(k for k, v in ARTIFACTS.items()
                                       if k != "manifest" and (self.out / v).exists())
        self.write_manifest()

    def write_manifest(self):
        self.out.mkdir(parents=True, exist_ok=True)
        for key, name in ARTIFACTS.items():
            p = self.out / name
            if key != "manifest" and p.exists():
                self.manifest.checksums[name] = sha256(p)
        self.manifest.save(self.path("manifest"))

    # stage 1
    def load(self):
        def go():
            self.cfg.check_paths()
            d = self.cfg.data
            self.kg = load_kg(d.kg_items, d.kg_facts, d.type_predicate)
            self.splits = {s: load_benchmark(getattr(d, s)) for s in ("train", "dev", "test")}
            self.out.mkdir(parents=True, exist_ok=True)
        self._stage("load", go)

    # stage 2
    def train_qa_orig(self):
        def go():
            qa = OverlapQaModel(self.kg, smoothing=self.cfg.qa.smoothing)
            qa.train(training_pairs(self.kg, self.splits["train"]))
            qa.save(self.path("qa_orig"))
            self.qa_orig = qa
        self._stage("train_qa_orig", go)

    def load_qa(self, which: str) -> OverlapQaModel:
        p = self.path("qa_" + which)
        if not p.exists():
            raise PipelineError("evaluate", f"{p} not found; train the {which} model first")
        return OverlapQaModel.load(self.kg, p)

    def generator(self):
        rule = RuleGenerator(self.kg)
        if self.cfg.generator.mode == "rule_noisy":
            return NoisyGenerator(rule, self.cfg.generator.noise_rate, self.kg)
        return rule

    def reward_fn(self):
        if self.cfg.reward == "intrinsic":
            return lambda qa, history, reform, orig, gold: reward_intrinsic(qa, history, reform, orig)

        def extrinsic(qa, history, reform, orig, gold):
            return reward_extrinsic(qa.answer(history, reform), qa.answer(history, orig), gold)
        return extrinsic

    # stage 3
    def train_rcs(self, checkpoint: Optional[Path] = None):
        def go():
            ckpt = checkpoint or self.cfg.rcs_checkpoint
            if ckpt is not None:
                # zero-shot reuse: never touches dev rewards
                self.net, _, self.encoder = load_checkpoint(ckpt)
                save_checkpoint(self.path("rcs"), self.net, self.cfg.dqn, self.encoder)
                return
            if self.qa_orig is None:
                self.qa_orig = self.load_qa("orig") if self.path("qa_orig").exists() else None
            if self.qa_orig is None:
                raise PipelineError("train_rcs", "QA_orig is needed for rewards; run train-qa first")
            self.encoder = HashedBowEncoder(self.cfg.dqn.d)
            self.net = train_rcs(self.splits["dev"], self.kg, self.qa_orig, self.generator(),
                                 self.reward_fn(), self.cfg.dqn, self.encoder)
            save_checkpoint(self.path("rcs"), self.net, self.cfg.dqn, self.encoder)
        self._stage("train_rcs", go)

    def _ensure_rcs(self):
        if self.net is None:
            p = self.cfg.rcs_checkpoint or self.path("rcs")
            if not Path(p).exists():
                raise PipelineError("generate", f"no RCS checkpoint at {p}; run train-rcs first")
            self.net, _, self.encoder = load_checkpoint(p)

    # stage 4
    def generate(self, mode: str = "top_k"):
        if mode not in MODES:
            raise ValidationError(f"unknown augmentation mode {mode!r}; expected one of {MODES}")

        def go():
            if mode == "completion_file":
                self.reformulations = self._completions()
            else:
                if mode in ("top_k", "sample_cats"):
                    self._ensure_rcs()
                self.reformulations = self._generate(mode)
            with open(self.path("reformulations"), "w", encoding="utf-8") as fh:
                for ref in self.reformulations:
                    fh.write(json.dumps(ref.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
        self._stage("generate", go)

    def _generate(self, mode: str) -> list[Reformulation]:
        gen = self.generator()
        out = []
        n = 0
        for conv in self.splits["train"]:
            for turn in conv.turns:
                n += 1
                aq = annotate(self.kg, conv, turn.index)
                mask = valid_actions(aq, self.kg)
                rng = stage_rng(self.cfg.seed, 4, n)
                chosen = select_categories(mode, aq, mask, self.cfg.k, rng, self.net, self.encoder,
                                           self.cfg.dqn.tau)
                for cid in chosen:
                    cat = as_category(cid)
                    if not mask[cat.index]:
                        raise ContractError(f"selected {cid} is not valid for {conv.id}:{turn.index}")
                    ref = gen.generate(aq.history, aq, cat, rng)
                    if ref is None:
                        raise ContractError(f"generator failed on valid {cid} for {conv.id}:{turn.index}")
                    out.append(ref)
        return out

    def _completions(self) -> list[Reformulation]:
        path = self.cfg.completion_file
        if path is None:
            raise ValidationError("completion_file mode needs completion_file in the config")
        rewrites = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    rewrites[(str(obj["conv"]), int(obj["turn"]))] = obj["text"]
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                    raise ValidationError(f"{path}:{lineno}: malformed completion ({e})") from None
        out = []
        for conv in self.splits["train"]:
            for turn in conv.turns:
                key = (conv.id, turn.index)
                if key not in rewrites:
                    raise ValidationError(f"{path}: no rewrite for {conv.id} turn {turn.index}")
                out.append(Reformulation(key, None, tokenize(rewrites[key]), provenance="external"))
        return out

    # stage 5
    def train_qa_robust(self):
        def go():
            pairs = augment_training_set(training_pairs(self.kg, self.splits["train"]), self.reformulations)
            qa = OverlapQaModel(self.kg, smoothing=self.cfg.qa.smoothing)
            qa.train(pairs)
            qa.save(self.path("qa_robust"))
            self.qa_robust = qa
        self._stage("train_qa_robust", go)

    # stage 6
    def evaluate(self, which: str, paraphrases: bool = True) -> MetricsReport:
        def go():
            qa = {"orig": self.qa_orig, "robust": self.qa_robust}[which] or self.load_qa(which)
            has_paras = any(t.paraphrases for c in self.splits["test"] for t in c.turns)
            report = evaluate(qa, self.splits["test"], paraphrases and has_paras, self.kg)
            report.save(self.path("report_" + which))
            return report
        return self._stage(f"evaluate_{which}", go)

    def finish(self):
        self.manifest.status = "ok"
        self.write_manifest()


def _run(cfg: PipelineConfig, mode: str = "top_k"):
    run = Run(cfg)
    run.load()
    run.train_qa_orig()
    if mode in ("top_k", "sample_cats"):
        run.train_rcs()
    run.generate(mode)
    run.train_qa_robust()
    orig = run.evaluate("orig")
    robust = run.evaluate("robust")
    run.finish()
    return orig, robust, run


def run_e2e(cfg: PipelineConfig) -> tuple[MetricsReport, MetricsReport, RunManifest]:
    orig, robust, run = _run(cfg)
    return orig, robust, run.manifest


def run_ablation(cfg: PipelineConfig, mode: str) -> MetricsReport:
    """Replace RCS top-k selection with `mode` and report QA_robust."""
    if mode not in MODES:
        raise ValidationError(f"unknown ablation mode {mode!r}")
    _, robust, _ = _run(cfg, mode)
    return robust


def emit_distant_pairs(cfg: PipelineConfig, cap: Optional[int] = None) -> Path:
    cap = cfg.distant_pairs_cap if cap is None else cap
    if cap < 0:
        raise ValidationError("cap must be >= 0")
    run = Run(cfg)
    run.load()

    def go():
        pairs = generate_distant_pairs(run.kg, run.splits["dev"], stage_rng(cfg.seed, 8), cap)
        path = run.path("distant_pairs")
        try:
            with open(path, "w", encoding="utf-8") as fh:
                for p in pairs:
                    fh.write(json.dumps(p.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
        except OSError as e:
            raise OSError(f"cannot write {path}: {e.strerror}") from None
        return path
    return run._stage("distant_pairs", go)
