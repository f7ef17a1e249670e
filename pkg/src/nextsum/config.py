"""Pipeline configuration: JSON file -> nested dataclasses, unknown keys rejected.

Precedence is command-line flag > config file > dataclass default. Every
stage seed is explicit: either given under ``seeds`` or derived from the base
``seed`` by hashing the stage name.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from nextsum.predictor import TrainConfig

STAGES = ("split", "content_model", "importance", "train", "eval", "chmm")


class ConfigError(ValueError):
    pass


@dataclass
class ContentModelConfig:
    topic_range: tuple[int, int] = (2, 8)
    delta: float = 0.01
    max_iters: int = 20
    unk_cutoff: int = 2
    init_sample: int = 2000

    def __post_init__(self):
        lo, hi = (int(v) for v in self.topic_range)
        if not 1 <= lo <= hi:
            raise ConfigError(f"bad topic_range {self.topic_range}")
        self.topic_range = (lo, hi)


@dataclass
class ImportanceConfig:
    enabled: bool = True
    epochs: int = 8
    lr: float = 0.01
    batch_size: int = 256
    max_examples: int = 60000


@dataclass
class PipelineConfig:
    corpus: str | None = None
    embeddings: str | None = None
    workdir: str = "work"
    embedding_dim: int = 300
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    top_words: int = 1000
    seed: int = 0
    seeds: dict[str, int] = field(default_factory=dict)
    content_model: ContentModelConfig = field(default_factory=ContentModelConfig)
    importance: ImportanceConfig = field(default_factory=ImportanceConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    system: str = "nextsum"
    length: int | None = None

    def __post_init__(self):
        unknown = set(self.seeds) - set(STAGES)
        if unknown:
            raise ConfigError(f"unknown stage seeds {sorted(unknown)}; stages are {list(STAGES)}")
        if len(self.split) != 3 or any(r < 0 for r in self.split):
            raise ConfigError("split must be three non-negative ratios")
        self.split = tuple(float(r) for r in self.split)

    def stage_seed(self, stage: str) -> int:
        if stage not in STAGES:
            raise KeyError(stage)
        if stage in self.seeds:
            return int(self.seeds[stage])
        digest = hashlib.sha256(f"{self.seed}:{stage}".encode()).digest()
        return int.from_bytes(digest[:4], "little") >> 1

    def train_config(self) -> TrainConfig:
        return dataclasses.replace(self.train, seed=self.stage_seed("train"))

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["train"].pop("seed")
        return d


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown config keys {[where + k for k in unknown]}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        kwargs[key] = _build(sub, value, f"{where}{key}.") if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


_NESTED = {
    (PipelineConfig, "content_model"): ContentModelConfig,
    (PipelineConfig, "importance"): ImportanceConfig,
    (PipelineConfig, "train"): TrainConfig,
}


def from_dict(data: dict) -> PipelineConfig:
    if isinstance(data.get("train"), dict) and "seed" in data["train"]:
        raise ConfigError("set the training seed under seeds.train, not train.seed")
    try:
        return _build(PipelineConfig, data, "")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(data)
