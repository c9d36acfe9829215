"""
Toy Fréchet video distance.

Clips are embedded with a fixed, seeded random orthonormal projection of each
frame plus first-difference statistics over time; the score is the Fréchet
distance between Gaussian fits of real and generated embeddings. Scores are
only comparable between runs that share the embed seed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.linalg

from models.generator import GeneratorNet
from msgv_types.errors import NonFiniteError, ShapeError
from msgv_types.types import EvalConfig, VideoClip
from synthetic.dataset import render_clip
from synthetic.scenes import SceneSpec

logger = logging.getLogger(__name__)

PROJECTION_DIM = 64


@dataclass
class FeatureStats:
    mean: np.ndarray
    cov: np.ndarray
    count: int


@lru_cache(maxsize=8)
def projection_matrix(input_dim: int, output_dim: int = PROJECTION_DIM, seed: int = 1234) -> np.ndarray:
    """(input_dim, output_dim) matrix with orthonormal columns, fixed by `seed`."""
    if output_dim > input_dim:
        raise ValueError(f"cannot project {input_dim} dims onto {output_dim} orthonormal directions")
    gaussian = np.random.default_rng(seed).standard_normal((input_dim, output_dim))
    q, r = np.linalg.qr(gaussian)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    q.setflags(write=False)
    return q


def feature_embed(clip: VideoClip, n_frames: int, embed_seed: int = 1234) -> np.ndarray:
    """[mean P, mean ΔP, std ΔP] of the first `n_frames` projected frames P."""
    if n_frames < 2:
        raise ValueError(f"embedding needs at least 2 frames, got {n_frames}")
    if len(clip) < n_frames:
        raise ValueError(f"clip has {len(clip)} frames, embedding needs {n_frames}")
    flat = clip.frames[:n_frames].reshape(n_frames, -1)
    projected = flat @ projection_matrix(flat.shape[1], PROJECTION_DIM, embed_seed)
    deltas = np.diff(projected, axis=0)
    return np.concatenate([projected.mean(axis=0), deltas.mean(axis=0), deltas.std(axis=0)])


def gaussian_stats(features: Sequence[np.ndarray]) -> FeatureStats:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if features.shape[0] < 2:
        raise ValueError(f"need at least 2 samples for a covariance, got {features.shape[0]}")
    cov = np.atleast_2d(np.cov(features, rowvar=False, ddof=1))
    return FeatureStats(mean=features.mean(axis=0), cov=0.5 * (cov + cov.T), count=features.shape[0])


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    values, vectors = scipy.linalg.eigh(matrix)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def frechet_distance(a: FeatureStats, b: FeatureStats) -> float:
    """‖μ_a − μ_b‖² + Tr(Σ_a + Σ_b − 2(Σ_a Σ_b)^{1/2})."""
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise ShapeError("frechet_distance", a.cov.shape, b.cov.shape)
    # Tr (Σ_a Σ_b)^{1/2} == nuclear norm of √Σ_b √Σ_a
    singular = scipy.linalg.svdvals(_sqrt_psd(b.cov) @ _sqrt_psd(a.cov))
    trace_sqrt = float(np.sum(singular))
    diff = a.mean - b.mean
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * trace_sqrt)
    if not np.isfinite(value):
        raise NonFiniteError("frechet_distance")
    return value


def real_clip_stats(specs: Sequence[SceneSpec], count: int, n_frames: int, embed_seed: int) -> FeatureStats:
    """Stats of the first `count` scenes (cycled) rendered at t = 0..n_frames-1."""
    times = np.arange(n_frames, dtype=np.float64)
    embeddings = [
        feature_embed(render_clip(specs[i % len(specs)], times), n_frames, embed_seed) for i in range(count)
    ]
    return gaussian_stats(embeddings)


def evaluate_frechet(
    generator: GeneratorNet,
    specs: Sequence[SceneSpec],
    eval_cfg: EvalConfig,
    lengths: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> Dict[int, float]:
    """Toy Fréchet score of `generator` against the scenes, per segment length."""
    lengths = sorted(set(lengths or [eval_cfg.eval_frames]))
    longest = lengths[-1]
    times = np.arange(longest, dtype=np.float64)
    rng = np.random.default_rng(seed)
    fake_clips = []
    for _ in range(eval_cfg.eval_clips):
        z_c, track = generator.sample_latents(rng, float(longest - 1))
        fake_clips.append(generator.generate_clip(z_c, track, times).clip())
    real_clips = [render_clip(specs[i % len(specs)], times) for i in range(eval_cfg.eval_clips)]

    scores = {}
    for n in lengths:
        fake = gaussian_stats([feature_embed(c, n, eval_cfg.embed_seed) for c in fake_clips])
        real = gaussian_stats([feature_embed(c, n, eval_cfg.embed_seed) for c in real_clips])
        scores[n] = frechet_distance(fake, real)
        logger.info("toy Fréchet over %d clips of %d frames: %.4f", eval_cfg.eval_clips, n, scores[n])
    return scores
