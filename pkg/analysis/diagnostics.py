"""Motion-style diagnostics: style similarity, attention over time, attention maps, decomposition grids."""
from __future__ import annotations

import logging
from typing import List, Sequence, Union

import numpy as np

from autodiff.tensor import Tensor, no_grad
from models.generator import GeneratorNet
from msgv_types.errors import ShapeError, UnknownLayerError
from msgv_types.types import MotionNoiseTrack, VideoClip

logger = logging.getLogger(__name__)

OVERLAY_COLOR = np.array([1.0, -1.0, -1.0])
OVERLAY_ALPHA = 0.6


def _require_motion_styles(generator: GeneratorNet, layer_id: str) -> None:
    if layer_id not in generator.layer_ids:
        raise UnknownLayerError(layer_id)
    if not generator.style.has_motion_styles:
        raise ValueError("the model has no motion styles (k=0)")


def cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of rows; rows with zero norm get 0 everywhere."""
    vectors = np.asarray(vectors, dtype=np.float64).reshape(len(vectors), -1)
    norms = np.linalg.norm(vectors, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        logger.warning("zero-norm motion style(s) %s; their similarities are set to 0", np.flatnonzero(zero).tolist())
    unit = vectors / np.where(zero, 1.0, norms)[:, None]
    sims = unit @ unit.T
    sims[zero, :] = 0.0
    sims[:, zero] = 0.0
    np.fill_diagonal(sims, np.where(zero, 0.0, 1.0))
    return sims


def motion_style_cosine(
    generator: GeneratorNet,
    z_c: Union[np.ndarray, Tensor],
    track: MotionNoiseTrack,
    t: float,
    layer_id: str,
) -> np.ndarray:
    """K×K cosine similarities of the flattened motion styles of one layer at time t."""
    _require_motion_styles(generator, layer_id)
    with no_grad():
        v = generator.motion.codes(generator.motion.temporal_conv(track), [t], track.anchor_spacing)
        w = generator.style.map_content(np.asarray(z_c, dtype=np.float64)[None]).w
        vectors = generator.style.motion_vectors(w, v, t=t)
        styles = generator.style.hyper_styles(vectors, layer_id).styles
    return cosine_matrix(styles.data[0].reshape(generator.cfg.k, -1))


def attention_trajectory(
    generator: GeneratorNet,
    z_c: Union[np.ndarray, Tensor],
    track: MotionNoiseTrack,
    times: Sequence[float],
    layer_id: str,
) -> np.ndarray:
    """(T, K) attention per style over time: softmax(A_t) averaged over output channels."""
    _require_motion_styles(generator, layer_id)
    if len(times) == 0:
        raise ValueError("times must not be empty")
    out = generator.generate_clip(z_c, track, times)
    return np.stack([record.probs.mean(axis=0) for record in out.records[layer_id]])


def attention_map(logits: np.ndarray, features: np.ndarray) -> np.ndarray:
    """map[k] = Σ_o softmax_K(A_t)[o, k]·F_t[o], shape (K, H, W)."""
    logits = np.asarray(logits, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if logits.ndim != 2 or features.ndim != 3 or logits.shape[0] != features.shape[0]:
        raise ShapeError("attention_map", logits.shape, features.shape)
    shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs = shifted / shifted.sum(axis=1, keepdims=True)
    return np.einsum("ok,ohw->khw", probs, features)


def normalize_map(amap: np.ndarray) -> np.ndarray:
    low, high = float(amap.min()), float(amap.max())
    if high - low == 0.0:
        return np.zeros_like(amap)
    return (amap - low) / (high - low)


def attention_overlay(frame: np.ndarray, amap: np.ndarray, alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """Blend a normalized (H, W) map onto a (3, H, W) frame in [-1, 1] as a red heat layer."""
    if frame.shape[1:] != amap.shape:
        raise ShapeError("attention_overlay", frame.shape, amap.shape)
    weight = alpha * normalize_map(amap)[None]
    return (1.0 - weight) * frame + weight * OVERLAY_COLOR[:, None, None]


def decomposition_grid(
    generator: GeneratorNet,
    contents: Sequence[np.ndarray],
    tracks: Sequence[MotionNoiseTrack],
    times: Sequence[float],
) -> List[List[VideoClip]]:
    """grid[i][j]: motion track i (rows) rendered with content j (columns)."""
    if not contents or not tracks:
        raise ValueError("decomposition grid needs at least one content and one track")
    return [[generator.generate_clip(z_c, track, times).clip() for z_c in contents] for track in tracks]


def tile_grid(grid: List[List[VideoClip]]) -> np.ndarray:
    """(T, C, rows·H, cols·W) frames of a clip grid."""
    rows = [np.concatenate([clip.frames for clip in row], axis=3) for row in grid]
    return np.concatenate(rows, axis=2)
