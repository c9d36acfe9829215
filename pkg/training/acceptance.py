"""
Directional checks of a trained motion-style model.

For every seed the configured K is trained against K=1 on the same scenes and
both are scored by toy Fréchet distance; the K arm is then checked for attention
that moves over time and for motion styles that are not all alike.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from analysis.diagnostics import attention_trajectory, motion_style_cosine
from models.generator import GeneratorNet
from msgv_types.errors import ConfigError
from msgv_types.types import RunConfig
from training.ablation import run_ablation
from training.trainer import FINAL_CHECKPOINT, load_generator

logger = logging.getLogger(__name__)

ACCEPTANCE_NAME = "acceptance.csv"
DEFAULT_SEEDS = (0, 1, 2)
TRAJECTORY_FRAMES = 64
MIN_TRAJECTORY_STD = 1e-3
MIN_MOVING_STYLES = 2
MAX_MEAN_COSINE = 0.9


@dataclass
class SeedResult:
    seed: int
    frechet_k: float
    frechet_single: float
    moving_styles: int
    max_trajectory_std: float
    mean_offdiag_cosine: float

    @property
    def k_wins(self) -> bool:
        return self.frechet_k <= self.frechet_single


@dataclass
class AcceptanceReport:
    k: int
    steps: int
    seeds: List[SeedResult]

    @property
    def frechet_ok(self) -> bool:
        # K must win at least two thirds of the seed pairs
        return 3 * sum(r.k_wins for r in self.seeds) >= 2 * len(self.seeds)

    @property
    def attention_ok(self) -> bool:
        return all(r.moving_styles >= MIN_MOVING_STYLES for r in self.seeds)

    @property
    def cosine_ok(self) -> bool:
        return all(r.mean_offdiag_cosine < MAX_MEAN_COSINE for r in self.seeds)

    @property
    def passed(self) -> bool:
        return self.frechet_ok and self.attention_ok and self.cosine_ok


def style_checks(generator: GeneratorNet, seed: int, frames: int = TRAJECTORY_FRAMES) -> Tuple[int, float, float]:
    """(styles whose attention std over time exceeds the threshold, largest std, mean |off-diagonal cosine|)."""
    k = generator.cfg.k
    if k < 2:
        raise ValueError(f"style checks need at least 2 motion styles, got k={k}")
    layer_id = f"b{generator.cfg.resolution}.conv0"
    z_c, track = generator.sample_latents(np.random.default_rng(seed), float(frames - 1))
    spread = attention_trajectory(generator, z_c, track, np.arange(frames, dtype=np.float64), layer_id).std(axis=0)
    sims = motion_style_cosine(generator, z_c, track, 0.0, layer_id)
    off_diagonal = np.abs(sims[~np.eye(k, dtype=bool)])
    return int(np.sum(spread > MIN_TRAJECTORY_STD)), float(spread.max()), float(off_diagonal.mean())


def run_acceptance(
    base: RunConfig,
    out_dir: Union[str, Path],
    seeds: Sequence[int] = DEFAULT_SEEDS,
    steps: Optional[int] = None,
) -> AcceptanceReport:
    k = base.generator.k
    if k < 2:
        raise ConfigError(f"acceptance compares k ≥ 2 against k=1, got k={k}", key="k")
    if not seeds:
        raise ValueError("acceptance needs at least one seed")
    out_dir = Path(out_dir)
    report = AcceptanceReport(k=k, steps=steps if steps is not None else base.train.total_steps, seeds=[])

    for seed in seeds:
        seed_dir = out_dir / f"seed={seed}"
        arms = run_ablation(base.with_overrides(seed=seed), "k", [str(k), "1"], seed_dir, steps=steps)
        generator, _ = load_generator(seed_dir / f"k={k}" / FINAL_CHECKPOINT)
        moving, max_std, cosine = style_checks(generator, seed)
        result = SeedResult(seed, arms[0].frechet, arms[1].frechet, moving, max_std, cosine)
        report.seeds.append(result)
        logger.info(
            "seed %d: frechet k=%d %.4f vs k=1 %.4f, %d moving styles (max std %.2e), mean cosine %.4f",
            seed, k, result.frechet_k, result.frechet_single, moving, max_std, cosine,
        )

    path = out_dir / ACCEPTANCE_NAME
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "steps", f"frechet_k{k}", "frechet_k1", "moving_styles", "max_trajectory_std",
                         "mean_offdiag_cosine"])
        for r in report.seeds:
            writer.writerow([r.seed, report.steps, repr(r.frechet_k), repr(r.frechet_single), r.moving_styles,
                             repr(r.max_trajectory_std), repr(r.mean_offdiag_cosine)])
    logger.info("wrote %s", path)
    return report
