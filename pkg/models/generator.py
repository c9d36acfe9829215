"""
Video generator: constant ⊕ v_t input, stacked MoStAtt synthesis blocks and a
final 1×1 toRGB with tanh.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from autodiff import functional as F
from autodiff.nn import Conv2d, Module, Parameter
from autodiff.tensor import Tensor, no_grad
from models.motion_codes import MotionEncoder, num_anchors_for, sample_motion_noise
from models.mostatt_conv import AttentionRecord, ModConv2d
from models.style_hypernet import LayerShape, StyleNetworks
from msgv_types.types import GeneratorConfig, MotionNoiseTrack, VideoClip

logger = logging.getLogger(__name__)


@dataclass
class GeneratorOutput:
    frames: Tensor  # (T, 3, H, W)
    times: np.ndarray
    records: Dict[str, List[AttentionRecord]] = field(default_factory=dict)
    features: Dict[str, np.ndarray] = field(default_factory=dict)

    def clip(self) -> VideoClip:
        return VideoClip(frames=self.frames.data.copy(), times=self.times.copy())


class GeneratorNet(Module):
    def __init__(self, cfg: GeneratorConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.motion = MotionEncoder(
            cfg.d_z, cfg.d_v, rng, num_layers=cfg.motion_conv_layers, kernel_size=cfg.motion_kernel
        )
        self.const = Parameter(rng.standard_normal((cfg.const_channels, 4, 4)))
        self.convs: List[ModConv2d] = []
        c_in = cfg.const_channels + cfg.d_v
        for b, c_out in enumerate(cfg.channels):
            res = 8 * 2 ** b
            for j in range(2):
                self.convs.append(
                    ModConv2d(
                        f"b{res}.conv{j}",
                        c_in,
                        c_out,
                        cfg.kernel_size,
                        rng,
                        strategy=cfg.strategy,
                        demod=cfg.demodulate,
                    )
                )
                c_in = c_out
        shapes = {
            conv.layer_id: LayerShape(conv.out_channels, conv.in_channels, conv.kernel_size, conv.kernel_size)
            for conv in self.convs
        }
        self.style = StyleNetworks(cfg, shapes, rng)
        self.to_rgb = Conv2d(cfg.channels[-1], 3, 1, rng)
        logger.debug("generator: %d modulated layers, %d parameters", len(self.convs), self.num_parameters())

    @property
    def layer_ids(self) -> List[str]:
        return [conv.layer_id for conv in self.convs]

    @property
    def layer_shapes(self) -> Dict[str, LayerShape]:
        return dict(self.style.layers)

    def synthesize(
        self,
        z_c: Union[Tensor, np.ndarray],
        track: MotionNoiseTrack,
        times: Sequence[float],
        trace: bool = False,
    ) -> GeneratorOutput:
        """Differentiable frames of one clip, with every layer's attention records."""
        times = np.asarray(times, dtype=np.float64)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a non-empty 1-D sequence")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        n = times.size
        cfg = self.cfg

        v = self.motion.codes(self.motion.temporal_conv(track), times, track.anchor_spacing)
        w = self.style.map_content(z_c).w
        const = F.broadcast_to(F.reshape(self.const, (1,) + self.const.shape), (n,) + self.const.shape)
        code = F.broadcast_to(F.reshape(v, (n, cfg.d_v, 1, 1)), (n, cfg.d_v, 4, 4))
        x = F.concat([const, code], axis=1)

        vectors = None
        if self.style.has_motion_styles:
            w_rows = F.broadcast_to(F.reshape(w, (1, -1)), (n, w.shape[-1]))
            vectors = self.style.motion_vectors(w_rows, v, t=times)

        out = GeneratorOutput(frames=None, times=times)
        for i, conv in enumerate(self.convs):
            if i % 2 == 0:
                x = F.upsample_nearest2d(x, 2)
            s = self.style.affine_style(w, conv.layer_id).s
            motion = self.style.modulation_matrix(vectors, conv.layer_id) if vectors is not None else None
            x, records = conv(x, s, motion, times=times, keep_features=trace)
            out.records[conv.layer_id] = records
            if trace:
                out.features[conv.layer_id] = x.data.copy()
        out.frames = F.tanh(self.to_rgb(x))
        return out

    def generate_clip(
        self,
        z_c: Union[Tensor, np.ndarray],
        track: MotionNoiseTrack,
        times: Sequence[float],
        trace: bool = False,
    ) -> GeneratorOutput:
        """Inference-only generation; no graph is recorded."""
        with no_grad():
            return self.synthesize(z_c, track, times, trace=trace)

    def sample_latents(self, rng: np.random.Generator, max_time: float) -> Tuple[np.ndarray, MotionNoiseTrack]:
        """Fresh z_c and a motion track long enough to reach `max_time`."""
        z_c = rng.standard_normal(self.cfg.d_c)
        anchors = num_anchors_for(max_time, self.cfg.anchor_spacing)
        track = sample_motion_noise(int(rng.integers(2 ** 31)), anchors, self.cfg.d_z, self.cfg.anchor_spacing)
        return z_c, track

    def attention_logits(self, output: GeneratorOutput, layer_id: Optional[str] = None) -> List[Tensor]:
        ids = [layer_id] if layer_id is not None else list(output.records)
        return [rec.logits for lid in ids for rec in output.records.get(lid, [])]
