"""Training configuration with strict JSON loading (unknown keys are errors)."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .losses import BetaSchedule, LossWeights
from .models import EncoderConfig, HeadConfig
from .numerics.optim import ConfigError, OptimizerConfig
from .transforms import AuxConfig


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    pair_subset_k: int = 10
    dataset: str = ""
    out_dir: str = "runs/pretrain"
    max_images: int = 0
    checkpoint_every: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    beta: BetaSchedule = field(default_factory=lambda: BetaSchedule(start_epoch=3, ramp_epochs=10))
    aux: AuxConfig = field(default_factory=AuxConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    head: HeadConfig = field(default_factory=HeadConfig)

    def validate(self) -> "TrainConfig":
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2: negatives need another image in the batch")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if not 1 <= self.pair_subset_k <= 10:
            raise ConfigError("pair_subset_k must be in [1, 10] for K=5 views")
        if self.aux.out_size != self.encoder.input_size:
            raise ConfigError(
                f"aux.out_size ({self.aux.out_size}) must equal encoder.input_size ({self.encoder.input_size})"
            )
        self.optimizer.validate()
        return self

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory() if fields[name].default_factory is not dataclasses.MISSING else None
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}{name}.")
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where or 'config'}: {e}") from e


def config_from_dict(data: dict) -> TrainConfig:
    return _build(TrainConfig, data, "").validate()


def load_config(path) -> TrainConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    return config_from_dict(data)
