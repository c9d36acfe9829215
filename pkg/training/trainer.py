"""
Adversarial training on sparse clips.

Each step samples T frames per real clip (random start, gaps in [1, max_gap]),
generates fake clips at independently sampled times, updates D on both (plus
lazy R1 every `r1_interval` steps) and then updates G on loss_G + λ_div·L_div.
All randomness comes from the model seed and the data seed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor
from models.discriminator import DiscriminatorNet, difference_items, frame_differences, num_items
from models.generator import GeneratorNet
from msgv_types.errors import NonFiniteError
from msgv_types.types import RunConfig, VideoClip
from synthetic.dataset import SceneDataset, make_dataset
from synthetic.scenes import SceneSpec
from training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from training.losses import adversarial_losses, check_finite, diversity_loss, generator_loss, r1_parameter_grads
from training.metrics_log import MetricsLog, MetricsRow
from training.optim import Adam

logger = logging.getLogger(__name__)

METRICS_NAME = "metrics.csv"
FINAL_CHECKPOINT = "ckpt_final.msgv"


def checkpoint_name(step: int) -> str:
    return f"ckpt_{step:08d}.msgv"


def sample_clip_times(rng: np.random.Generator, clip_length: int, frames: int, max_gap: int = 8) -> np.ndarray:
    """`frames` strictly increasing integer times in [0, clip_length)."""
    if frames < 1:
        raise ValueError(f"frames must be ≥ 1, got {frames}")
    if clip_length < frames:
        raise ValueError(f"clip of {clip_length} frames is too short for {frames} samples")
    if max_gap < 1:
        raise ValueError(f"max_gap must be ≥ 1, got {max_gap}")
    times = [int(rng.integers(0, clip_length - frames + 1))]
    for k in range(1, frames):
        # leave room for the frames still to come
        latest = clip_length - (frames - k)
        high = min(max_gap, latest - times[-1])
        times.append(times[-1] + int(rng.integers(1, high + 1)))
    return np.asarray(times, dtype=np.int64)


@dataclass
class TrainState:
    config: RunConfig
    generator: GeneratorNet
    discriminator: DiscriminatorNet
    opt_g: Adam
    opt_d: Adam
    dataset: SceneDataset
    noise_rng: np.random.Generator
    data_rng: np.random.Generator
    step: int = 0


def build_state(config: RunConfig, specs: Optional[List[SceneSpec]] = None) -> TrainState:
    gen_cfg, train = config.generator, config.train
    init_rng = np.random.default_rng(train.seed)
    generator = GeneratorNet(gen_cfg, init_rng)
    discriminator = DiscriminatorNet(
        config.discriminator, gen_cfg.resolution, num_items(train.frames_per_clip, train.motion_diff), init_rng
    )
    if specs is None:
        specs = make_dataset(train.dataset_kind, train.dataset_size, train.data_seed, gen_cfg.resolution,
                             train.clip_length)
    return TrainState(
        config=config,
        generator=generator,
        discriminator=discriminator,
        opt_g=Adam(list(generator.named_parameters()), train.lr_g, train.beta1, train.beta2),
        opt_d=Adam(list(discriminator.named_parameters()), train.lr_d, train.beta1, train.beta2),
        dataset=SceneDataset(specs),
        noise_rng=np.random.default_rng([train.seed, 1]),
        data_rng=np.random.default_rng([train.data_seed, 1]),
    )


def real_items(frames: np.ndarray, times: np.ndarray, motion_diff: bool) -> Tuple[np.ndarray, np.ndarray]:
    """Discriminator input for a real batch (B, T, C, H, W)."""
    if not motion_diff:
        return frames, times
    pairs = [frame_differences(VideoClip(frames=f, times=t)) for f, t in zip(frames, times)]
    return np.stack([p[0] for p in pairs]), np.stack([p[1] for p in pairs])


def _sample_real(state: TrainState) -> Tuple[np.ndarray, np.ndarray]:
    train = state.config.train
    return state.dataset.sample_batch(
        state.data_rng,
        train.batch_size,
        lambda rng: sample_clip_times(rng, train.clip_length, train.frames_per_clip, train.max_gap),
    )


def train_step(state: TrainState, real_frames: np.ndarray, real_times: np.ndarray) -> MetricsRow:
    train = state.config.train
    G, D = state.generator, state.discriminator
    step = state.step + 1

    # fakes, kept as a graph for the G update
    fake_items, fake_times, records = [], [], []
    for _ in range(real_frames.shape[0]):
        z_c, track = G.sample_latents(state.noise_rng, train.clip_length - 1)
        times = sample_clip_times(state.noise_rng, train.clip_length, train.frames_per_clip, train.max_gap)
        out = G.synthesize(z_c, track, times)
        items, item_times = difference_items(out.frames, times, train.motion_diff)
        fake_items.append(F.reshape(items, (1,) + items.shape))
        fake_times.append(item_times)
        records.append(out.records)
    fake_items = F.concat(fake_items, axis=0)
    fake_times = np.stack(fake_times)
    r_items, r_times = real_items(real_frames, real_times, train.motion_diff)

    # discriminator
    D.zero_grad()
    logit_real = D(Tensor(r_items), r_times)
    logit_fake = D(Tensor(fake_items.data), fake_times)
    loss_d, _ = adversarial_losses(logit_real, logit_fake)
    loss_d.backward()
    r1 = 0.0
    if train.lambda_r1 > 0 and step % train.r1_interval == 0:
        result = r1_parameter_grads(lambda x: D(x, r_times), r_items, D.parameters())
        r1 = result.value
        scale = train.lambda_r1 * train.r1_interval
        for p in D.parameters():
            p.grad = p.grad + scale * result.grads[id(p)] if p.grad is not None else scale * result.grads[id(p)]
    grad_norm_d = state.opt_d.grad_norm()
    check_finite(step, loss_d=loss_d.item(), r1=r1, grad_norm_d=grad_norm_d)
    state.opt_d.step()

    # generator
    G.zero_grad()
    loss_g = generator_loss(D(fake_items, fake_times))
    l_div = diversity_loss(records[0], train.div_identity_target)
    for clip_records in records[1:]:
        l_div = l_div + diversity_loss(clip_records, train.div_identity_target)
    l_div = l_div * (1.0 / len(records))
    total = loss_g + l_div * train.lambda_div if train.use_div else loss_g
    total.backward()
    grad_norm_g = state.opt_g.grad_norm()
    check_finite(step, loss_g=loss_g.item(), l_div=l_div.item(), grad_norm_g=grad_norm_g)
    state.opt_g.step()
    D.zero_grad()

    state.step = step
    return MetricsRow(
        step=step,
        loss_d=loss_d.item(),
        loss_g=loss_g.item(),
        l_div=l_div.item(),
        r1=r1,
        grad_norm_g=grad_norm_g,
        grad_norm_d=grad_norm_d,
    )


def state_to_checkpoint(state: TrainState) -> Checkpoint:
    tensors = {f"g.{name}": p.data for name, p in state.generator.named_parameters()}
    tensors.update({f"d.{name}": p.data for name, p in state.discriminator.named_parameters()})
    tensors.update(state.opt_g.state_dict("opt_g"))
    tensors.update(state.opt_d.state_dict("opt_d"))
    return Checkpoint(
        step=state.step,
        config_text=state.config.to_text(),
        rng_states={"noise": state.noise_rng.bit_generator.state, "data": state.data_rng.bit_generator.state},
        tensors=tensors,
    )


def _strip(tensors, prefix: str):
    return {name[len(prefix):]: value for name, value in tensors.items() if name.startswith(prefix)}


def restore_state(ckpt: Checkpoint, specs: Optional[List[SceneSpec]] = None) -> TrainState:
    state = build_state(RunConfig.from_text(ckpt.config_text), specs)
    state.generator.load_state_dict(_strip(ckpt.tensors, "g."))
    state.discriminator.load_state_dict(_strip(ckpt.tensors, "d."))
    state.opt_g.load_state_dict(ckpt.tensors, "opt_g")
    state.opt_d.load_state_dict(ckpt.tensors, "opt_d")
    state.noise_rng.bit_generator.state = ckpt.rng_states["noise"]
    state.data_rng.bit_generator.state = ckpt.rng_states["data"]
    state.step = ckpt.step
    return state


def load_generator(path: Union[str, Path]) -> Tuple[GeneratorNet, RunConfig]:
    """Generator weights and run config of a checkpoint, for sampling and analysis."""
    ckpt = load_checkpoint(path)
    config = RunConfig.from_text(ckpt.config_text)
    generator = GeneratorNet(config.generator, np.random.default_rng(config.train.seed))
    generator.load_state_dict(_strip(ckpt.tensors, "g."))
    return generator, config


def run_training(state: TrainState, out_dir: Union[str, Path], total_steps: Optional[int] = None) -> TrainState:
    """Train until `total_steps`, appending to metrics.csv and writing checkpoints in `out_dir`."""
    train = state.config.train
    total_steps = train.total_steps if total_steps is None else total_steps
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = MetricsLog(out_dir / METRICS_NAME)
    if state.step:
        metrics.truncate_after(state.step)
        logger.info("resuming at step %d", state.step)
    while state.step < total_steps:
        frames, times = _sample_real(state)
        try:
            row = train_step(state, frames, times)
        except NonFiniteError as err:
            raise NonFiniteError(err.what, step=state.step + 1) from err
        metrics.append(row)
        if row.step % train.log_every == 0 or row.step == total_steps:
            logger.info(
                "step %d  loss_d %.4f  loss_g %.4f  l_div %.4f  r1 %.4g",
                row.step, row.loss_d, row.loss_g, row.l_div, row.r1,
            )
        if train.ckpt_every and row.step % train.ckpt_every == 0:
            save_checkpoint(state_to_checkpoint(state), out_dir / checkpoint_name(row.step))
    save_checkpoint(state_to_checkpoint(state), out_dir / FINAL_CHECKPOINT)
    return state
