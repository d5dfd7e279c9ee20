"""Pipeline configuration, loaded from YAML.

Every field has a default; relative input paths in a config file resolve
against the file's directory, ``out_dir`` against the working directory.
Defaults point at the bundled toy benchmark.

```yaml
data:
  kg_items: kg_items.jsonl      # KG items (bundled toy KG)
  kg_facts: kg_facts.jsonl      # KG facts
  train: train.jsonl            # QA training conversations
  dev: dev.jsonl                # RCS training conversations
  test: test.jsonl              # evaluation conversations (with paraphrases)
  type_predicate: P31
out_dir: runs/default           # artifacts, reports and the run manifest
seed: 0                         # overrides dqn.seed
k: 5                            # categories selected per training question
reward: extrinsic               # extrinsic | intrinsic
generator:
  mode: rule                    # rule | rule_noisy
  noise_rate: 0.1               # used by rule_noisy only
qa:
  smoothing: 1.0                # softmax temperature for top-1 probability
dqn: {alpha: 1.0e-5, gamma: 1.0, tau: 0.3, batch_size: 10, epochs: 5, h: 128, d: 256}
distant_pairs_cap: 2000         # per-category cap for distant pairs
completion_file: null           # one rewrite per train turn, for --mode completion_file
rcs_checkpoint: null            # reuse a trained RCS instead of training on dev
```
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .corpus import ValidationError
from .rcs import DqnConfig

REWARD_MODES = ("extrinsic", "intrinsic")
GENERATOR_MODES = ("rule", "rule_noisy")


class ConfigError(ValidationError):
    pass


def bundled_data_dir() -> Path:
    return Path(str(resources.files("reign") / "data"))


def bundled_config_path() -> Path:
    return bundled_data_dir() / "toy.yaml"


@dataclass
class DataPaths:
    kg_items: Path = field(default_factory=lambda: bundled_data_dir() / "kg_items.jsonl")
    kg_facts: Path = field(default_factory=lambda: bundled_data_dir() / "kg_facts.jsonl")
    train: Path = field(default_factory=lambda: bundled_data_dir() / "train.jsonl")
    dev: Path = field(default_factory=lambda: bundled_data_dir() / "dev.jsonl")
    test: Path = field(default_factory=lambda: bundled_data_dir() / "test.jsonl")
    type_predicate: str = "P31"


@dataclass
class GeneratorConfig:
    mode: str = "rule"
    noise_rate: float = 0.1


@dataclass
class QaConfig:
    smoothing: float = 1.0


@dataclass
class PipelineConfig:
    data: DataPaths = field(default_factory=DataPaths)
    out_dir: Path = Path("runs/default")
    seed: int = 0
    k: int = 5
    reward: str = "extrinsic"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    qa: QaConfig = field(default_factory=QaConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)
    distant_pairs_cap: int = 2000
    completion_file: Optional[Path] = None
    rcs_checkpoint: Optional[Path] = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.reward not in REWARD_MODES:
            raise ConfigError(f"reward must be one of {REWARD_MODES}, got {self.reward!r}")
        if self.generator.mode not in GENERATOR_MODES:
            raise ConfigError(f"generator.mode must be one of {GENERATOR_MODES}")
        if not 0.0 <= self.generator.noise_rate <= 1.0:
            raise ConfigError("generator.noise_rate must be in [0, 1]")
        if self.qa.smoothing <= 0:
            raise ConfigError("qa.smoothing must be > 0")
        if self.distant_pairs_cap < 0:
            raise ConfigError("distant_pairs_cap must be >= 0")
        if self.dqn.seed != self.seed:
            self.dqn = replace(self.dqn, seed=self.seed)

    def with_overrides(self, seed: Optional[int] = None, out_dir=None, **kw) -> "PipelineConfig":
        changes = dict(kw)
        if seed is not None:
            changes["seed"] = seed
            changes["dqn"] = replace(self.dqn, seed=seed)
        if out_dir is not None:
            changes["out_dir"] = Path(out_dir)
        return replace(self, **changes)

    def check_paths(self) -> None:
        for name in ("kg_items", "kg_facts", "train", "dev", "test"):
            p = getattr(self.data, name)
            if not Path(p).is_file():
                raise ConfigError(f"data.{name}: no such file {p}")
        for name in ("completion_file", "rcs_checkpoint"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name}: no such file {p}")

    def to_json(self) -> dict:
        def conv(x):
            if isinstance(x, Path):
                return str(x)
            if isinstance(x, dict):
                return {k: conv(v) for k, v in x.items()}
            return x
        return conv(asdict(self))


def _section(cls, obj, name, base: Path):
    if obj is None:
        return cls()
    if not isinstance(obj, dict):
        raise ConfigError(f"{name} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
    kw = {}
    for k, v in obj.items():
        if cls is DataPaths and k != "type_predicate":
            v = _path(v, base)
        kw[k] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name}: {e}") from None


def _path(value, base: Path) -> Optional[Path]:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def config_from_dict(obj: dict, base: Path = Path(".")) -> PipelineConfig:
    obj = dict(obj or {})
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {
        "data": _section(DataPaths, obj.pop("data", None), "data", base),
        "generator": _section(GeneratorConfig, obj.pop("generator", None), "generator", base),
        "qa": _section(QaConfig, obj.pop("qa", None), "qa", base),
    }
    dqn = obj.pop("dqn", None) or {}
    try:
        kw["dqn"] = DqnConfig.from_dict(dqn)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"dqn: {e}") from None
    for name in ("completion_file", "rcs_checkpoint"):
        if name in obj:
            obj[name] = _path(obj[name], base)
    if obj.get("out_dir") is not None:
        obj["out_dir"] = Path(obj["out_dir"])
    kw.update(obj)
    try:
        return PipelineConfig(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path=None) -> PipelineConfig:
    """Load a YAML config; None loads the bundled toy config."""
    path = Path(path) if path is not None else bundled_config_path()
    try:
        obj = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML ({e})") from None
    if obj is not None and not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(obj or {}, base=path.resolve().parent)
