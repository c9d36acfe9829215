"""One training arm per value of a swept config key, scored by toy Fréchet distance."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

from analysis.frechet import evaluate_frechet
from msgv_types.types import RunConfig
from synthetic.dataset import make_dataset
from training.trainer import build_state, run_training

logger = logging.getLogger(__name__)

ABLATION_NAME = "ablation.csv"
SWEEPABLE_KEYS = ("k", "strategy", "motion_diff", "use_div", "lambda_div", "d_m", "rank", "demodulate", "seed")


@dataclass
class AblationRow:
    key: str
    value: str
    frechet: float


def arm_config(base: RunConfig, key: str, value: str) -> RunConfig:
    return base.with_overrides(**{key: value})


def run_ablation(
    base: RunConfig,
    key: str,
    values: Sequence[str],
    out_dir: Union[str, Path],
    steps: Optional[int] = None,
) -> List[AblationRow]:
    """Train and evaluate every arm; arms share the dataset and the embedding seed."""
    if key not in SWEEPABLE_KEYS:
        raise ValueError(f"cannot sweep '{key}'; choose one of {', '.join(SWEEPABLE_KEYS)}")
    if not values:
        raise ValueError("a sweep needs at least one value")
    # validate every arm before spending time on the first one
    configs = [arm_config(base, key, value) for value in values]

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, res = base.train, base.generator.resolution
    specs = make_dataset(train.dataset_kind, train.dataset_size, train.data_seed, res, train.clip_length)

    rows = []
    for value, config in zip(values, configs):
        arm_dir = out_dir / f"{key}={value}"
        logger.info("ablation arm %s=%s -> %s", key, value, arm_dir)
        state = run_training(build_state(config, specs), arm_dir, total_steps=steps)
        scores = evaluate_frechet(state.generator, specs, config.eval, seed=config.train.seed)
        rows.append(AblationRow(key=key, value=str(value), frechet=scores[config.eval.eval_frames]))

    path = out_dir / ABLATION_NAME
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["key", "value", "frechet"])
        for row in rows:
            writer.writerow([row.key, row.value, repr(row.frechet)])
    logger.info("wrote %s", path)
    return rows
