"""
Hypernetwork cost at one layer shape: parameter counts and wall time of the
low-rank path (head, reconstruct, attention) against a full-rank emulation in
which the hypernetwork head emits every filter weight of every style before
the same attention step.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from autodiff.tensor import Tensor, no_grad
from models.mostatt_conv import AttentionRecord, mostatt
from models.style_hypernet import LayerShape, hyper_param_count, lowrank_reconstruct

MIN_REPS = 10
# columns of the full-rank head materialized at once; the same block is reused across the output
FULL_RANK_CHUNK = 16384


@dataclass
class Timing:
    mean_ms: float
    std_ms: float

    def __str__(self) -> str:
        return f"{self.mean_ms:.3f} ± {self.std_ms:.3f} ms"


@dataclass
class BenchResult:
    layer: LayerShape
    d_h: int
    rank: int
    styles: int
    lowrank_params: int
    fullrank_params: int
    lowrank_time: Timing
    fullrank_time: Timing


def parse_layer(text: str) -> LayerShape:
    try:
        c_out, c_in, k_h, k_w = (int(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"--layer expects c_out,c_in,kh,kw, got '{text}'") from None
    if min(c_out, c_in, k_h, k_w) < 1:
        raise ValueError(f"layer dimensions must be positive, got '{text}'")
    return LayerShape(c_out, c_in, k_h, k_w)


def _time(fn: Callable[[], object], reps: int) -> Timing:
    fn()  # warm-up
    samples = []
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - start) * 1e3)
    return Timing(float(np.mean(samples)), float(np.std(samples)))


def bench_paths(layer: LayerShape, d_h: int, rank: int, styles: int = 8,
                seed: int = 0) -> Tuple[Callable[[], AttentionRecord], Callable[[], AttentionRecord]]:
    """Low-rank and full-rank paths from hidden state to the attended styles of one frame."""
    rng = np.random.default_rng(seed)
    hidden = rng.standard_normal((styles, d_h))
    weight = Tensor(rng.standard_normal((layer.c_out, layer.flat_dim)))
    low_head = rng.standard_normal((d_h, rank * layer.style_length)) * 0.01

    def lowrank_path():
        with no_grad():
            styles_out = Tensor((hidden @ low_head).reshape(styles, rank, layer.style_length))
            full = lowrank_reconstruct(styles_out, layer.c_in, layer.k_h, layer.k_w)
            motion = Tensor(full.data.reshape(styles, layer.flat_dim))
            return mostatt(weight, motion)

    total = layer.c_out * layer.flat_dim
    chunk = min(FULL_RANK_CHUNK, total)
    full_head = rng.standard_normal((d_h, chunk)) * 0.01
    buffer = np.empty((styles, chunk))
    bounds: List[Tuple[int, int]] = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]
    # the first c_in·k_h·k_w emitted columns act as the full-rank M_t
    motion = np.empty((styles, layer.flat_dim))

    def fullrank_path():
        for lo, hi in bounds:
            np.matmul(hidden, full_head[:, : hi - lo], out=buffer[:, : hi - lo])
            if lo < layer.flat_dim:
                top = min(hi, layer.flat_dim)
                motion[:, lo:top] = buffer[:, : top - lo]
        with no_grad():
            return mostatt(weight, Tensor(motion))

    return lowrank_path, fullrank_path


def run_bench(layer: LayerShape, d_h: int, rank: int, reps: int = MIN_REPS, styles: int = 8,
              seed: int = 0) -> BenchResult:
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} repetitions, got {reps}")
    lowrank_params, fullrank_params = hyper_param_count(layer, d_h, rank)
    lowrank_path, fullrank_path = bench_paths(layer, d_h, rank, styles, seed)
    return BenchResult(
        layer=layer,
        d_h=d_h,
        rank=rank,
        styles=styles,
        lowrank_params=lowrank_params,
        fullrank_params=fullrank_params,
        lowrank_time=_time(lowrank_path, reps),
        fullrank_time=_time(fullrank_path, reps),
    )
