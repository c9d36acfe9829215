"""
Content and motion style networks.

F_c maps content noise to w; per-layer affines A turn w into content styles;
F_m turns concat(w, v_t) into K motion vectors; the hypernetwork H (shared
trunk, one linear head per layer) emits low-rank motion styles that
`lowrank_reconstruct` expands to full (c_in, k_h, k_w) modulation tensors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple, Union

import numpy as np

from autodiff import functional as F
from autodiff.nn import Linear, MLP, Module
from autodiff.tensor import Tensor
from msgv_types.errors import ShapeError, UnknownLayerError
from msgv_types.types import GeneratorConfig


@dataclass(frozen=True)
class LayerShape:
    c_out: int
    c_in: int
    k_h: int
    k_w: int

    @property
    def style_length(self) -> int:
        return self.c_in + self.k_h + self.k_w

    @property
    def flat_dim(self) -> int:
        return self.c_in * self.k_h * self.k_w


@dataclass
class LatentContent:
    z_c: Tensor
    w: Tensor


@dataclass
class ContentStyle:
    layer_id: str
    s: Tensor


@dataclass
class MotionVectorSet:
    t: Union[float, np.ndarray]
    vectors: Tensor  # (..., K, d_m)


@dataclass
class MotionStyleSet:
    t: Union[float, np.ndarray]
    layer_id: str
    styles: Tensor  # (..., K, R, c_in + k_h + k_w)
    rank: int


def lowrank_reconstruct(style: Tensor, c_in: int, k_h: int, k_w: int) -> Tensor:
    """M = Σ_r v1^r ⊗ v2^r ⊗ v3^r for styles shaped (..., R, c_in + k_h + k_w)."""
    if style.shape[-1] != c_in + k_h + k_w:
        raise ShapeError("lowrank_reconstruct", style.shape, (c_in, k_h, k_w))
    lead = style.shape[:-1]
    v1 = F.reshape(style[..., :c_in], lead + (c_in, 1, 1))
    v2 = F.reshape(style[..., c_in:c_in + k_h], lead + (1, k_h, 1))
    v3 = F.reshape(style[..., c_in + k_h:], lead + (1, 1, k_w))
    return F.sum(v1 * v2 * v3, axis=-4)


def hyper_param_count(layer: LayerShape, d_h: int, rank: int) -> Tuple[int, int]:
    """Weights of one hypernetwork output head: (low-rank, full-rank)."""
    if min(layer.c_out, layer.c_in, layer.k_h, layer.k_w, d_h, rank) <= 0:
        raise ValueError("layer dims, d_h and rank must be positive")
    lowrank = d_h * rank * layer.style_length
    fullrank = d_h * layer.c_out * layer.c_in * layer.k_h * layer.k_w
    return lowrank, fullrank


def _identity_style_bias(layer: LayerShape, rank: int) -> np.ndarray:
    # every rank term reconstructs to 1/R, so the initial M_t is all ones
    row = np.concatenate([np.full(layer.c_in, 1.0 / rank), np.ones(layer.k_h), np.ones(layer.k_w)])
    return np.tile(row, rank)


class StyleNetworks(Module):
    def __init__(self, cfg: GeneratorConfig, layers: Dict[str, LayerShape], rng: np.random.Generator):
        self.k = cfg.k
        self.rank = cfg.rank
        self.d_m = cfg.d_m
        self.layers = dict(layers)
        self.mapping = MLP([cfg.d_c] * (cfg.mapping_layers + 1), rng)
        self.affines = {
            layer_id: Linear(cfg.d_c, shape.c_in, rng, bias_init=1.0) for layer_id, shape in self.layers.items()
        }
        if self.k > 0:
            self.motion_net = MLP([cfg.d_c + cfg.d_v, cfg.motion_hidden, cfg.motion_hidden, cfg.k * cfg.d_m], rng)
            self.hyper_trunk = Linear(cfg.d_m, cfg.d_h, rng)
            self.hyper_heads = {
                layer_id: Linear(
                    cfg.d_h,
                    cfg.rank * shape.style_length,
                    rng,
                    init_std=0.01,
                    equalized=False,
                    bias_init=_identity_style_bias(shape, cfg.rank),
                )
                for layer_id, shape in self.layers.items()
            }

    @property
    def has_motion_styles(self) -> bool:
        return self.k > 0

    def layer(self, layer_id: str) -> LayerShape:
        if layer_id not in self.layers:
            raise UnknownLayerError(layer_id)
        return self.layers[layer_id]

    def map_content(self, z_c: Union[Tensor, np.ndarray]) -> LatentContent:
        z_c = z_c if isinstance(z_c, Tensor) else Tensor(z_c)
        return LatentContent(z_c=z_c, w=self.mapping(z_c))

    def affine_style(self, w: Tensor, layer_id: str) -> ContentStyle:
        self.layer(layer_id)
        return ContentStyle(layer_id=layer_id, s=self.affines[layer_id](w))

    def motion_vectors(self, w: Tensor, v_t: Tensor, t: Union[float, np.ndarray] = 0.0) -> MotionVectorSet:
        if not self.has_motion_styles:
            raise ValueError("motion vectors are undefined with k=0")
        out = self.motion_net(F.concat([w, v_t], axis=-1))
        return MotionVectorSet(t=t, vectors=F.reshape(out, out.shape[:-1] + (self.k, self.d_m)))

    def hyper_styles(self, m: MotionVectorSet, layer_id: str) -> MotionStyleSet:
        shape = self.layer(layer_id)
        hidden = F.leaky_relu(self.hyper_trunk(m.vectors))
        out = self.hyper_heads[layer_id](hidden)
        styles = F.reshape(out, out.shape[:-1] + (self.rank, shape.style_length))
        return MotionStyleSet(t=m.t, layer_id=layer_id, styles=styles, rank=self.rank)

    def modulation_matrix(self, m: MotionVectorSet, layer_id: str) -> Tensor:
        """Stacked M_t for one layer, shape (..., K, c_in·k_h·k_w)."""
        shape = self.layer(layer_id)
        styles = self.hyper_styles(m, layer_id).styles
        full = lowrank_reconstruct(styles, shape.c_in, shape.k_h, shape.k_w)
        return F.reshape(full, full.shape[:-3] + (shape.flat_dim,))

    def param_report(self, d_h: int) -> List[Tuple[str, LayerShape, int, int]]:
        return [(layer_id, shape, *hyper_param_count(shape, d_h, self.rank)) for layer_id, shape in self.layers.items()]
