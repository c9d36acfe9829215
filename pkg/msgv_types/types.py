from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from msgv_types.errors import ConfigError


def _split_ints(value):
    if isinstance(value, str):
        return [int(v) for v in value.replace(" ", "").split(",") if v]
    return value


class GeneratorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    resolution: int = Field(default=32, description="Target frame size; 4·2^b")
    channels: List[int] = Field(default=[128, 96, 64], description="Output channels of each synthesis block")
    const_channels: int = 128
    kernel_size: int = 3
    d_c: int = Field(default=64, description="Content noise / latent w size")
    mapping_layers: int = 2
    d_z: int = Field(default=16, description="Motion noise size per anchor")
    d_v: int = Field(default=16, description="Motion code size (number of waves)")
    motion_conv_layers: int = 2
    motion_kernel: int = 11
    anchor_spacing: float = 16.0
    k: int = Field(default=8, description="Number of motion styles; 0 disables motion modulation")
    rank: int = 1
    d_m: int = 128
    d_h: int = 128
    motion_hidden: int = 256
    strategy: Literal["i", "ii"] = "i"
    demodulate: bool = True

    split_channels = field_validator("channels", mode="before")(_split_ints)

    @model_validator(mode="after")
    def _check_shape(self):
        blocks = self.num_blocks
        if self.resolution != 4 * 2 ** blocks or blocks < 1:
            raise ValueError(f"resolution must be 4·2^b with b ≥ 1, got {self.resolution}")
        if len(self.channels) != blocks:
            raise ValueError(f"channels needs {blocks} entries for resolution {self.resolution}")
        if self.k < 0 or self.rank < 1 or self.anchor_spacing <= 0:
            raise ValueError("k must be ≥ 0, rank ≥ 1 and anchor_spacing > 0")
        return self

    @property
    def num_blocks(self) -> int:
        return max(int(round(np.log2(max(self.resolution, 1) / 4))), 0)


class DiscriminatorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    disc_channels: int = 32
    disc_head_channels: int = 64
    disc_embed_dim: int = 64
    disc_time_dim: int = 16


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    frames_per_clip: int = 3
    batch_size: int = 4
    total_steps: int = 1000
    lambda_div: float = 1.0
    lambda_r1: float = 1.0
    r1_interval: int = 16
    lr_g: float = 2e-3
    lr_d: float = 2e-3
    beta1: float = 0.0
    beta2: float = 0.99
    seed: int = 0
    data_seed: int = 0
    motion_diff: bool = True
    use_div: bool = True
    div_identity_target: bool = False
    max_gap: int = 8
    clip_length: int = 64
    dataset_kind: Literal["single-motion", "two-motion", "three-motion"] = "two-motion"
    dataset_size: int = 256
    ckpt_every: int = 1000
    log_every: int = 10

    @model_validator(mode="after")
    def _check(self):
        if self.motion_diff and self.frames_per_clip < 2:
            raise ValueError("frames_per_clip must be ≥ 2 when motion_diff is on")
        if min(self.lambda_div, self.lambda_r1) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.clip_length < self.frames_per_clip:
            raise ValueError("clip_length must be ≥ frames_per_clip")
        return self


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    embed_seed: int = 1234
    eval_clips: int = 256
    eval_frames: int = 8


_SECTIONS = {
    "generator": GeneratorConfig,
    "discriminator": DiscriminatorConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


def _render(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class RunConfig(BaseModel):
    """Every configurable knob of a run, read from a flat key=value file."""

    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = Field(default_factory=DiscriminatorConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @staticmethod
    def known_keys() -> Dict[str, str]:
        return {key: section for section, model in _SECTIONS.items() for key in model.model_fields}

    @classmethod
    def from_pairs(cls, pairs: List[Tuple[str, str]]) -> "RunConfig":
        known = cls.known_keys()
        grouped: Dict[str, Dict[str, str]] = {section: {} for section in _SECTIONS}
        for key, value in pairs:
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'", key=key)
            grouped[known[key]][key] = value
        try:
            return cls(**{section: _SECTIONS[section](**values) for section, values in grouped.items()})
        except ValidationError as err:
            first = err.errors()[0]
            key = str(first["loc"][0]) if first.get("loc") else None
            raise ConfigError(f"invalid config: {first['msg']}" + (f" ({key})" if key else ""), key=key) from None

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        pairs = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got '{raw.strip()}'")
            key, value = line.split("=", 1)
            pairs.append((key.strip(), value.strip()))
        return cls.from_pairs(pairs)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def with_overrides(self, **overrides) -> "RunConfig":
        pairs = [tuple(line.split("=", 1)) for line in self.to_text().splitlines()]
        merged = dict(pairs)
        merged.update({k: _render(v) for k, v in overrides.items()})
        return RunConfig.from_pairs(list(merged.items()))

    def to_text(self) -> str:
        lines = []
        for section in _SECTIONS:
            model = getattr(self, section)
            for key in type(model).model_fields:
                lines.append(f"{key}={_render(getattr(model, key))}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MotionNoiseTrack:
    """Standard-normal motion noise anchors z^m_{t_0..t_n}, one row per anchor."""

    anchors: np.ndarray
    anchor_spacing: float
    seed: int

    @property
    def num_anchors(self) -> int:
        return self.anchors.shape[0]

    @property
    def duration(self) -> float:
        return (self.num_anchors - 1) * self.anchor_spacing


@dataclass
class VideoClip:
    """N frames (C, H, W) in [-1, 1] with strictly increasing timestamps."""

    frames: np.ndarray
    times: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[0] != self.times.shape[0]:
            raise ValueError(f"frames {self.frames.shape} do not match times {self.times.shape}")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("clip times must be strictly increasing")

    def __len__(self) -> int:
        return self.frames.shape[0]
