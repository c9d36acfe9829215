"""Seeded scene datasets, clip rendering and on-disk dumps."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from msgv_types.types import VideoClip
from synthetic.scenes import Blink, Entity, Oscillate, SceneSpec, Translate, render_frame
from utils.utils import write_ppm

logger = logging.getLogger(__name__)

DATASET_KINDS = ("single-motion", "two-motion", "three-motion")
CLIP_LENGTH = 64
MANIFEST_NAME = "manifest.txt"

# ranges below are for 32×32 and scale with resolution
SPEED_RANGE = (0.05, 0.25)
RADIUS_RANGE = (2.5, 4.5)
BLINK_PERIOD_RANGE = (8.0, 24.0)
BLINK_DUTY_RANGE = (0.3, 0.7)
OSC_AMPLITUDE_RANGE = (3.0, 6.0)
OSC_PERIOD_RANGE = (12.0, 32.0)


def _color(rng: np.random.Generator) -> Tuple[float, float, float]:
    return tuple(float(c) for c in rng.uniform(0.5, 1.0, size=3))


def _translating_disc(rng: np.random.Generator, res: int, clip_length: int) -> Entity:
    scale = res / 32.0
    radius = rng.uniform(*RADIUS_RANGE) * scale
    speed = rng.uniform(*SPEED_RANGE) * scale
    angle = rng.uniform(0.0, 2.0 * np.pi)
    vx, vy = speed * np.cos(angle), speed * np.sin(angle)
    position = []
    # start so the whole clip stays inside the frame
    for v in (vx, vy):
        low = radius - min(0.0, v * clip_length)
        high = res - radius - max(0.0, v * clip_length)
        position.append(rng.uniform(low, high) if high > low else res / 2.0)
    return Entity(shape="disc", x=position[0], y=position[1], size=radius, color=_color(rng),
                  motion=Translate(vx=float(vx), vy=float(vy)))


def _blinking_disc(rng: np.random.Generator, res: int) -> Entity:
    scale = res / 32.0
    radius = rng.uniform(*RADIUS_RANGE) * scale
    x, y = rng.uniform(radius, res - radius, size=2)
    return Entity(shape="disc", x=float(x), y=float(y), size=radius, color=_color(rng),
                  motion=Blink(period=float(rng.uniform(*BLINK_PERIOD_RANGE)),
                               duty=float(rng.uniform(*BLINK_DUTY_RANGE))))


def _oscillating_bar(rng: np.random.Generator, res: int) -> Entity:
    scale = res / 32.0
    half = rng.uniform(*RADIUS_RANGE) * scale * 1.5
    amplitude = rng.uniform(*OSC_AMPLITUDE_RANGE) * scale
    axis = "x" if rng.random() < 0.5 else "y"
    margin_x = half + (amplitude if axis == "x" else 0.0)
    margin_y = half * 0.25 + (amplitude if axis == "y" else 0.0)
    x = rng.uniform(margin_x, res - margin_x) if res > 2 * margin_x else res / 2.0
    y = rng.uniform(margin_y, res - margin_y) if res > 2 * margin_y else res / 2.0
    return Entity(shape="bar", x=float(x), y=float(y), size=float(half), color=_color(rng),
                  motion=Oscillate(axis=axis, amplitude=float(amplitude),
                                   period=float(rng.uniform(*OSC_PERIOD_RANGE))))


def make_dataset(kind: str, count: int, seed: int, resolution: int = 32,
                 clip_length: int = CLIP_LENGTH) -> List[SceneSpec]:
    """
    single-motion: one translating disc. two-motion: plus a blinking disc.
    three-motion: plus an oscillating bar.
    """
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind '{kind}', expected one of {DATASET_KINDS}")
    if count < 1:
        raise ValueError(f"count must be ≥ 1, got {count}")
    rng = np.random.default_rng(seed)
    background = "gradient"
    specs = []
    for _ in range(count):
        entities = [_translating_disc(rng, resolution, clip_length)]
        if kind in ("two-motion", "three-motion"):
            entities.append(_blinking_disc(rng, resolution))
        if kind == "three-motion":
            entities.append(_oscillating_bar(rng, resolution))
        specs.append(SceneSpec(resolution=resolution, background=background, entities=entities))
    return specs


def render_clip(spec: SceneSpec, times: Sequence[float]) -> VideoClip:
    times = np.asarray(times, dtype=np.float64)
    return VideoClip(frames=np.stack([render_frame(spec, float(t)) for t in times]), times=times)


class SceneDataset:
    """Real-clip source for training and evaluation."""

    def __init__(self, specs: Sequence[SceneSpec]):
        if not specs:
            raise ValueError("a dataset needs at least one scene")
        self.specs = list(specs)

    def __len__(self) -> int:
        return len(self.specs)

    def sample_batch(
        self,
        rng: np.random.Generator,
        batch_size: int,
        time_sampler: Callable[[np.random.Generator], np.ndarray],
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Frames (B, T, 3, H, W) and times (B, T) of randomly chosen scenes."""
        frames, times = [], []
        for _ in range(batch_size):
            spec = self.specs[int(rng.integers(len(self.specs)))]
            t = np.asarray(time_sampler(rng), dtype=np.float64)
            frames.append(render_clip(spec, t).frames)
            times.append(t)
        return np.stack(frames), np.stack(times)


def write_manifest(specs: Sequence[SceneSpec], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text("".join(spec.to_manifest_line() + "\n" for spec in specs), encoding="utf-8")
    return path


def read_manifest(path: Union[str, Path]) -> List[SceneSpec]:
    specs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            specs.append(SceneSpec.from_manifest_line(line))
        except ValueError as err:
            raise ValueError(f"{path}:{lineno}: {err}") from None
    return specs


def dump_dataset(specs: Sequence[SceneSpec], out_dir: Union[str, Path], frames: int = CLIP_LENGTH) -> Path:
    """Write manifest.txt and clip_%05d/frame_%06d.ppm for every scene."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(specs, out_dir / MANIFEST_NAME)
    for i, spec in enumerate(specs):
        clip_dir = out_dir / f"clip_{i:05d}"
        clip_dir.mkdir(exist_ok=True)
        for f in range(frames):
            write_ppm(clip_dir / f"frame_{f:06d}.ppm", render_frame(spec, float(f)))
    logger.info("dumped %d clips of %d frames to %s", len(specs), frames, out_dir)
    return out_dir
