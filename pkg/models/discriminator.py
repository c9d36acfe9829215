"""
Video discriminator.

Every item (frame or frame difference) goes through the same 2-D encoder down
to 8×8; the item features are concatenated along channels, a conv head turns
them into a global vector g, and the logit is ⟨e, g⟩ where e sums projected
sinusoidal encodings of the time offsets t_i − t_1.
"""
from __future__ import annotations

import math
from typing import List, Sequence, Tuple, Union

import numpy as np

from autodiff import functional as F
from autodiff.nn import Conv2d, Linear, Module
from autodiff.tensor import Tensor
from msgv_types.errors import ShapeError
from msgv_types.types import DiscriminatorConfig, VideoClip

FEATURE_RES = 8


def _midpoints(times: np.ndarray) -> np.ndarray:
    return 0.5 * (times[1:] + times[:-1])


def frame_differences(clip: VideoClip) -> Tuple[np.ndarray, np.ndarray]:
    """(x_1..x_N, |x_2−x_1|..|x_N−x_{N−1}|) with midpoint times for the differences."""
    if len(clip) < 2:
        raise ValueError(f"frame differences need at least 2 frames, got {len(clip)}")
    diffs = np.abs(clip.frames[1:] - clip.frames[:-1])
    return (
        np.concatenate([clip.frames, diffs], axis=0),
        np.concatenate([clip.times, _midpoints(clip.times)]),
    )


def difference_items(frames: Tensor, times: Sequence[float], motion_diff: bool = True) -> Tuple[Tensor, np.ndarray]:
    """Differentiable discriminator input for one clip of frames (N, C, H, W)."""
    times = np.asarray(times, dtype=np.float64)
    if frames.shape[0] != times.size:
        raise ShapeError("difference_items", frames.shape, times.shape)
    if not motion_diff:
        return frames, times
    if times.size < 2:
        raise ValueError(f"frame differences need at least 2 frames, got {times.size}")
    diffs = F.abs(frames[1:] - frames[:-1])
    return F.concat([frames, diffs], axis=0), np.concatenate([times, _midpoints(times)])


def num_items(frames_per_clip: int, motion_diff: bool) -> int:
    return 2 * frames_per_clip - 1 if motion_diff else frames_per_clip


def time_encoding(deltas: np.ndarray, dim: int, max_period: float = 128.0) -> np.ndarray:
    """Sinusoids of the time offsets, periods log-spaced in [1, max_period]."""
    if dim % 2:
        raise ValueError(f"time encoding size must be even, got {dim}")
    periods = np.geomspace(1.0, max_period, dim // 2)
    angles = 2.0 * np.pi * deltas[..., None] / periods
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


class DiscriminatorNet(Module):
    def __init__(self, cfg: DiscriminatorConfig, resolution: int, items: int, rng: np.random.Generator,
                 in_channels: int = 3):
        if resolution < FEATURE_RES or resolution & (resolution - 1):
            raise ValueError(f"discriminator resolution must be a power of two ≥ {FEATURE_RES}, got {resolution}")
        self.cfg = cfg
        self.items = items
        self.from_rgb = Conv2d(in_channels, cfg.disc_channels, 1, rng)
        self.downs: List[Conv2d] = [
            Conv2d(cfg.disc_channels, cfg.disc_channels, 3, rng)
            for _ in range(int(math.log2(resolution // FEATURE_RES)))
        ]
        self.head_conv = Conv2d(items * cfg.disc_channels, cfg.disc_head_channels, 3, rng)
        self.head = Linear(cfg.disc_head_channels * (FEATURE_RES // 2) ** 2, cfg.disc_embed_dim, rng)
        self.time_proj = Linear(cfg.disc_time_dim, cfg.disc_embed_dim, rng)

    def encode(self, x: Tensor) -> Tensor:
        """Shared per-item encoder: (M, C, H, W) -> (M, disc_channels, 8, 8)."""
        x = F.leaky_relu(self.from_rgb(x))
        for conv in self.downs:
            x = F.avg_pool2d(F.leaky_relu(conv(x)), 2)
        return x

    def forward(self, items: Tensor, times: Union[np.ndarray, Sequence[Sequence[float]]]) -> Tensor:
        """items (B, n, C, H, W) with times (B, n) -> logits (B,)."""
        times = np.asarray(times, dtype=np.float64)
        if items.ndim != 5 or times.shape != items.shape[:2]:
            raise ShapeError("discriminate", items.shape, times.shape)
        b, n = times.shape
        if n != self.items:
            raise ShapeError("discriminate items", (n,), (self.items,))
        feats = self.encode(F.reshape(items, (b * n,) + items.shape[2:]))
        feats = F.reshape(feats, (b, n * feats.shape[1]) + feats.shape[2:])
        h = F.avg_pool2d(F.leaky_relu(self.head_conv(feats)), 2)
        g = self.head(F.reshape(h, (b, -1)))
        deltas = times - times[:, :1]
        e = F.sum(self.time_proj(Tensor(time_encoding(deltas, self.cfg.disc_time_dim))), axis=1)
        return F.sum(e * g, axis=-1)

    def discriminate(self, items: Tensor, times: Sequence[float]) -> Tensor:
        """Scalar logit of one item sequence (n, C, H, W)."""
        times = np.asarray(times, dtype=np.float64)
        if items.ndim != 4 or items.shape[0] != times.size:
            raise ShapeError("discriminate", items.shape, times.shape)
        logits = self.forward(F.reshape(items, (1,) + items.shape), times[None])
        return F.reshape(logits, ())
