"""
Modulated convolution with motion-style attention (MoStAtt).

Strategy "i" modulates W_G by the content style first and attends the motion
styles against the result; strategy "ii" attends against the raw W_G, applies
the motion modulation and only then the content style. Demodulation, when
enabled, runs once after the whole chain. Each frame of a batch gets its own
weights; the layer loops over frames.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from autodiff import functional as F
from autodiff.nn import Module, Parameter
from autodiff.tensor import Tensor
from msgv_types.errors import ShapeError

logger = logging.getLogger(__name__)

STRATEGIES = ("i", "ii")
DEMOD_EPS = 1e-8


@dataclass
class FilterBank:
    weight: Tensor  # (c_out, c_in, k_h, k_w)
    bias: Tensor  # (c_out,)


@dataclass
class AttentionRecord:
    """Per-frame attention of one layer: logits A_t (c_out, K) and S_t (c_out, D)."""

    layer_id: str
    logits: Tensor
    attended: Tensor
    probs: np.ndarray
    t: Optional[float] = None
    features: Optional[np.ndarray] = None


@dataclass
class ModulatedWeights:
    """W after the first modulation step, and the final per-frame W_G^t."""

    intermediate: Tensor
    final: Tensor


def content_modulate(weight: Tensor, s: Tensor) -> Tensor:
    """W'[o,i,h,w] = W[o,i,h,w]·s[i]."""
    if s.ndim != 1 or s.shape[0] != weight.shape[1]:
        raise ShapeError("content_modulate", weight.shape, s.shape)
    return weight * F.reshape(s, (1, -1, 1, 1))


def mostatt(weight: Tensor, motion: Tensor, layer_id: str = "") -> AttentionRecord:
    """A_t = W_flat·M_tᵀ/√D, S_t = softmax_K(A_t)·M_t."""
    c_out = weight.shape[0]
    d = int(np.prod(weight.shape[1:]))
    if motion.ndim != 2 or motion.shape[1] != d:
        raise ShapeError("mostatt", weight.shape, motion.shape)
    if not np.all(np.any(motion.data != 0.0, axis=1)):
        logger.warning("%s: zero-norm motion style, its attention only ever zeroes weights", layer_id or "mostatt")
    flat = F.reshape(weight, (c_out, d))
    logits = F.matmul(flat, F.transpose(motion)) * (1.0 / math.sqrt(d))
    probs = F.softmax(logits, axis=-1)
    return AttentionRecord(layer_id=layer_id, logits=logits, attended=F.matmul(probs, motion), probs=probs.data)


def motion_modulate(weight: Tensor, attended: Tensor) -> Tensor:
    return weight * F.reshape(attended, weight.shape)


def demodulate(weight: Tensor, eps: float = DEMOD_EPS) -> Tensor:
    """Scale each output filter to unit L2 norm."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return weight * F.rsqrt(F.sum(weight * weight, axis=(1, 2, 3), keepdims=True) + eps)


def modulated_weights(
    weight: Tensor,
    s: Tensor,
    motion: Optional[Tensor],
    strategy: str = "i",
    demod: bool = True,
    layer_id: str = "",
) -> Tuple[ModulatedWeights, Optional[AttentionRecord]]:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown modulation strategy '{strategy}', expected one of {STRATEGIES}")
    record = None
    if motion is None:
        content = content_modulate(weight, s)
        final = content
    elif strategy == "i":
        content = content_modulate(weight, s)
        record = mostatt(content, motion, layer_id)
        final = motion_modulate(content, record.attended)
    else:
        record = mostatt(weight, motion, layer_id)
        content = motion_modulate(weight, record.attended)
        final = content_modulate(content, s)
    if demod:
        final = demodulate(final)
    return ModulatedWeights(intermediate=content, final=final), record


def modconv_forward(
    x: Tensor,
    bank: FilterBank,
    s: Tensor,
    motion: Optional[Tensor],
    strategy: str = "i",
    demod: bool = True,
    activate: bool = True,
    layer_id: str = "",
) -> Tuple[Tensor, Optional[AttentionRecord]]:
    """
    One frame through one modulated layer.

    `x` is (c_in, H, W) or (1, c_in, H, W); `motion` is the stacked M_t of
    shape (K, c_in·k_h·k_w), or None for content-only modulation.
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = F.reshape(x, (1,) + x.shape)
    weights, record = modulated_weights(bank.weight, s, motion, strategy, demod, layer_id)
    padding = bank.weight.shape[2] // 2
    y = F.conv2d(x, weights.final, padding=padding) + F.reshape(bank.bias, (1, -1, 1, 1))
    if activate:
        y = F.leaky_relu(y)
    if squeeze:
        y = F.reshape(y, y.shape[1:])
    return y, record


class ModConv2d(Module):
    """
    Modulated conv layer owning W_G and bias.

    W_G is stored at unit scale; the equalized-lr gain 1/√(c_in·k_h·k_w) is
    applied in the forward pass.
    """

    def __init__(
        self,
        layer_id: str,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        rng: np.random.Generator,
        strategy: str = "i",
        demod: bool = True,
        activate: bool = True,
    ):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown modulation strategy '{strategy}', expected one of {STRATEGIES}")
        self.layer_id = layer_id
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.strategy = strategy
        self.demod = demod
        self.activate = activate
        self.gain = 1.0 / math.sqrt(in_channels * kernel_size * kernel_size)
        self.weight = Parameter(rng.standard_normal((out_channels, in_channels, kernel_size, kernel_size)))
        self.bias = Parameter(np.zeros(out_channels))

    def filter_bank(self) -> FilterBank:
        return FilterBank(weight=self.weight * self.gain, bias=self.bias)

    def forward(
        self,
        x: Tensor,
        s: Tensor,
        motion: Optional[Tensor] = None,
        times: Optional[np.ndarray] = None,
        keep_features: bool = False,
    ) -> Tuple[Tensor, List[AttentionRecord]]:
        """
        x: (N, c_in, H, W); s: (c_in,) shared by all frames; motion: (N, K, D) or None.
        """
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(self.layer_id, x.shape, (self.in_channels,))
        if motion is not None and motion.shape[0] != x.shape[0]:
            raise ShapeError(self.layer_id, x.shape, motion.shape)
        bank = self.filter_bank()
        outputs, records = [], []
        for n in range(x.shape[0]):
            m = motion[n] if motion is not None else None
            y, record = modconv_forward(
                x[n:n + 1], bank, s, m, self.strategy, self.demod, self.activate, self.layer_id
            )
            outputs.append(y)
            if record is not None:
                record.t = float(times[n]) if times is not None else None
                if keep_features:
                    record.features = y.data[0].copy()
                records.append(record)
        return F.concat(outputs, axis=0), records
