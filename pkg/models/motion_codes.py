"""
Continuous-time motion codes v_t.

Motion noise anchors are mixed along time by a Conv1d stack (width 11), an
affine head predicts one bank of F sinusoids (amplitude, angular frequency,
phase) per anchor, and v_t evaluates the bank at any real t with the
parameters linearly interpolated between the two surrounding anchors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from autodiff import functional as F
from autodiff.nn import Linear, Module, Parameter
from autodiff.tensor import Tensor
from msgv_types.types import MotionNoiseTrack


@dataclass
class WaveParams:
    amplitudes: Tensor
    angular_frequencies: Tensor
    phases: Tensor


@dataclass
class MotionCode:
    t: float
    values: np.ndarray


def sample_motion_noise(seed: int, num_anchors: int, d_z: int, anchor_spacing: float) -> MotionNoiseTrack:
    if num_anchors < 2:
        raise ValueError(f"a motion track needs at least 2 anchors, got {num_anchors}")
    if anchor_spacing <= 0:
        raise ValueError(f"anchor_spacing must be positive, got {anchor_spacing}")
    rng = np.random.default_rng(seed)
    return MotionNoiseTrack(
        anchors=rng.standard_normal((num_anchors, d_z)),
        anchor_spacing=float(anchor_spacing),
        seed=int(seed),
    )


def num_anchors_for(max_time: float, anchor_spacing: float) -> int:
    """Smallest track whose last anchor lies at or beyond `max_time`."""
    return max(2, int(math.ceil(max_time / anchor_spacing)) + 1)


class MotionEncoder(Module):
    def __init__(
        self,
        d_z: int,
        d_v: int,
        rng: np.random.Generator,
        num_layers: int = 2,
        kernel_size: int = 11,
        min_period: float = 2.0,
        max_period: float = 64.0,
        identity_init: bool = False,
    ):
        self.d_z = d_z
        self.d_v = d_v
        self.padding = kernel_size // 2
        self.gain = 1.0 / math.sqrt(d_z * kernel_size)
        self.conv_weights = []
        self.conv_biases = []
        for _ in range(num_layers):
            if identity_init:
                w = np.zeros((d_z, d_z, kernel_size))
                w[np.arange(d_z), np.arange(d_z), self.padding] = 1.0 / self.gain
            else:
                w = rng.standard_normal((d_z, d_z, kernel_size))
            self.conv_weights.append(Parameter(w))
            self.conv_biases.append(Parameter(np.zeros(d_z)))
        self.head = Linear(d_z, 3 * d_v, rng)
        periods = np.geomspace(min_period, max_period, d_v)
        self.base_frequencies = 2.0 * np.pi / periods

    def temporal_conv(self, track: MotionNoiseTrack) -> Tensor:
        """(A, d_z) anchor features with long-range temporal context."""
        x = Tensor(track.anchors.T[None])
        for i, (w, b) in enumerate(zip(self.conv_weights, self.conv_biases)):
            x = F.conv1d(x, w * self.gain, padding=self.padding) + F.reshape(b, (1, -1, 1))
            if i < len(self.conv_weights) - 1:
                x = F.leaky_relu(x)
        return F.transpose(F.reshape(x, x.shape[1:]), (1, 0))

    def _bank(self, features: Tensor) -> WaveParams:
        raw = self.head(features)
        f = self.d_v
        return WaveParams(
            amplitudes=F.softplus(raw[..., :f] + 1.0),
            angular_frequencies=F.softplus(raw[..., f:2 * f] + 1.0) * self.base_frequencies,
            phases=raw[..., 2 * f:],
        )

    def wave_params(self, features: Tensor, interval_index: int) -> WaveParams:
        if not 0 <= interval_index < features.shape[0]:
            raise IndexError(f"interval {interval_index} outside track of {features.shape[0]} anchors")
        return self._bank(features[interval_index])

    def codes(self, features: Tensor, times: Sequence[float], anchor_spacing: float) -> Tensor:
        """v_t for every t in `times`, shape (T, d_v)."""
        t = np.asarray(times, dtype=np.float64)
        if np.any(t < 0):
            raise ValueError("motion codes are defined for t ≥ 0")
        bank = self._bank(features)
        last = features.shape[0] - 2
        position = t / anchor_spacing
        idx = np.clip(np.floor(position).astype(int), 0, last)
        alpha = np.clip(position - idx, 0.0, 1.0)[:, None]

        def interpolate(p: Tensor) -> Tensor:
            return p[idx] * (1.0 - alpha) + p[idx + 1] * alpha

        a = interpolate(bank.amplitudes)
        omega = interpolate(bank.angular_frequencies)
        phi = interpolate(bank.phases)
        return a * F.sin(omega * t[:, None] + phi)

    def motion_code(self, track: MotionNoiseTrack, t: float) -> MotionCode:
        values = self.codes(self.temporal_conv(track), [t], track.anchor_spacing)
        return MotionCode(t=float(t), values=values.data[0].copy())
