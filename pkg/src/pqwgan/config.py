"""JSON run configuration and the generator parameter file.

A config is one flat JSON object whose keys are the field names of
:class:`GeneratorConfig` and :class:`TrainConfig` plus the dataset keys
below. Unknown keys are rejected so a typo never silently falls back to a
default.
"""
from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError
from .generator import GeneratorConfig
from .trainer import TrainConfig

_GEN_KEYS = {f.name for f in dataclasses.fields(GeneratorConfig)}
_TRAIN_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}


@dataclass(frozen=True)
class DataConfig:
    dataset: str = "idx"  # "idx" or "bars"
    dataset_images: str | None = None
    dataset_labels: str | None = None
    classes: tuple = (0, 1)
    per_class: int = 1000
    bars_per_class: int = 50

    def __post_init__(self):
        if self.dataset not in ("idx", "bars"):
            raise ConfigError(f"dataset must be 'idx' or 'bars', got {self.dataset!r}")
        if self.per_class < 1 or self.bars_per_class < 1:
            raise ConfigError("per_class and bars_per_class must be >= 1")
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))


_DATA_KEYS = {f.name for f in dataclasses.fields(DataConfig)}


@dataclass(frozen=True)
class RunConfig:
    generator: GeneratorConfig
    train: TrainConfig
    data: DataConfig

    def to_dict(self) -> dict:
        out = {**self.generator.to_dict(), **self.train.to_dict(), **dataclasses.asdict(self.data)}
        out["classes"] = list(self.data.classes)
        return out


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _GEN_KEYS - _TRAIN_KEYS - _DATA_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    gen = {k: v for k, v in raw.items() if k in _GEN_KEYS}
    tr = {k: v for k, v in raw.items() if k in _TRAIN_KEYS}
    da = {k: v for k, v in raw.items() if k in _DATA_KEYS}
    try:
        return RunConfig(GeneratorConfig(**gen), TrainConfig(**tr), DataConfig(**da))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(raw)


# generator parameter file: 16-byte header then float64 LE angles in
# (patch, layer, qubit, phi/theta/omega) order
PARAMS_MAGIC = b"PQWG"
PARAMS_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


def save_params(theta, path):
    theta = np.asarray(theta, dtype="<f8")
    P, L, N, three = theta.shape
    if three != 3:
        raise ConfigError(f"parameter array must end in 3 angles, got shape {theta.shape}")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(PARAMS_MAGIC, PARAMS_VERSION, P, L, N))
        f.write(np.ascontiguousarray(theta).tobytes())


def load_params(path, config: GeneratorConfig | None = None) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < _HEADER.size:
        raise ParseError(f"{path}: truncated parameter header", offset=len(buf))
    magic, version, P, L, N = _HEADER.unpack_from(buf)
    if magic != PARAMS_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}", offset=0)
    if version != PARAMS_VERSION:
        raise ParseError(f"{path}: unsupported version {version}", offset=4)
    count = P * L * N * 3
    if len(buf) - _HEADER.size != 8 * count:
        raise ParseError(
            f"{path}: expected {count} angles, found {(len(buf) - _HEADER.size) // 8}",
            offset=_HEADER.size,
        )
    theta = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size).reshape(P, L, N, 3).copy()
    if config is not None and theta.shape != config.params_shape:
        expected = int(np.prod(config.params_shape))
        raise ConfigError(
            f"parameter file {path} holds {count} parameters with shape {theta.shape}, "
            f"config expects {expected} with shape {config.params_shape}"
        )
    return theta
