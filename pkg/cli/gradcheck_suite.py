"""
Finite-difference gradient suites behind `msgv gradcheck`.

  ops    every registered primitive on small random inputs
  layer  one modulated conv layer (strategies i and ii) at 16², K=4
  full   generator + discriminator + diversity loss at 16², K=4, sampled elements
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from autodiff import functional as F
from autodiff.gradcheck import GradCheckReport, check_tensors
from autodiff.tensor import Tensor
from models.discriminator import DiscriminatorNet, difference_items, num_items
from models.generator import GeneratorNet
from models.mostatt_conv import FilterBank, modconv_forward
from models.motion_codes import sample_motion_noise
from msgv_types.types import DiscriminatorConfig, GeneratorConfig
from training.losses import diversity_loss, generator_loss

logger = logging.getLogger(__name__)

SCOPES = ("ops", "layer", "full")
DEFAULT_TOL = 1e-4
DEFAULT_EPS = 1e-4


@dataclass
class SuiteResult:
    name: str
    report: GradCheckReport
    tol: float

    @property
    def passed(self) -> bool:
        return self.report.passed(self.tol)


@dataclass
class GradCase:
    name: str
    fn: Callable[..., Tensor]
    inputs: Dict[str, np.ndarray]


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(0.5, 1.5, size=shape)


def op_cases(rng: np.random.Generator) -> List[GradCase]:
    """One case per primitive; keys are the primitive names."""
    n = rng.standard_normal
    pos = lambda *shape: rng.uniform(0.5, 2.0, size=shape)  # noqa: E731
    return [
        GradCase("add", lambda a, b: F.add(a, b), {"a": n((3, 4)), "b": n((4,))}),
        GradCase("sub", lambda a, b: F.sub(a, b), {"a": n((3, 1)), "b": n((3, 4))}),
        GradCase("mul", lambda a, b: F.mul(a, b), {"a": n((2, 3)), "b": n((2, 3))}),
        GradCase("div", lambda a, b: F.div(a, b), {"a": n((2, 3)), "b": pos(2, 3)}),
        GradCase("neg", lambda x: F.neg(x), {"x": n((5,))}),
        GradCase("pow", lambda x: F.power(x, 2.5), {"x": pos(4)}),
        GradCase("abs", lambda x: F.abs(x), {"x": _away_from_zero(rng, (6,))}),
        GradCase("exp", lambda x: F.exp(x), {"x": n((4,))}),
        GradCase("log", lambda x: F.log(x), {"x": pos(4)}),
        GradCase("sqrt", lambda x: F.sqrt(x), {"x": pos(4)}),
        GradCase("rsqrt", lambda x: F.rsqrt(x), {"x": pos(4)}),
        GradCase("sin", lambda x: F.sin(x), {"x": n((5,))}),
        GradCase("cos", lambda x: F.cos(x), {"x": n((5,))}),
        GradCase("tanh", lambda x: F.tanh(x), {"x": n((5,))}),
        GradCase("leaky_relu", lambda x: F.leaky_relu(x), {"x": _away_from_zero(rng, (6,))}),
        GradCase("softplus", lambda x: F.softplus(x), {"x": n((5,))}),
        GradCase("sum", lambda x: F.sum(x, axis=1, keepdims=True), {"x": n((3, 4))}),
        GradCase("norm", lambda x: F.norm(x), {"x": n((3, 3))}),
        GradCase("reshape", lambda x: F.reshape(x, (4, 3)), {"x": n((2, 6))}),
        GradCase("transpose", lambda x: F.transpose(x, (2, 0, 1)), {"x": n((2, 3, 4))}),
        GradCase("broadcast_to", lambda x: F.broadcast_to(x, (3, 4)), {"x": n((3, 1))}),
        GradCase("getitem", lambda x: F.getitem(x, np.array([0, 2, 2, 1])), {"x": n((3, 2))}),
        GradCase("concat", lambda a, b: F.concat([a, b], axis=1), {"a": n((2, 3)), "b": n((2, 1))}),
        GradCase("matmul", lambda a, b: F.matmul(a, b), {"a": n((3, 4)), "b": n((4, 2))}),
        GradCase("softmax", lambda x: F.softmax(x, axis=-1), {"x": n((3, 4))}),
        GradCase("conv1d", lambda x, w: F.conv1d(x, w, padding=1), {"x": n((1, 2, 7)), "w": n((3, 2, 3))}),
        GradCase("conv2d", lambda x, w: F.conv2d(x, w, padding=1), {"x": n((1, 2, 5, 5)), "w": n((3, 2, 3, 3))}),
        GradCase("zero_insert2d", lambda x: F.zero_insert2d(x, 2), {"x": n((1, 2, 3, 3))}),
        GradCase("upsample_nearest2d", lambda x: F.upsample_nearest2d(x, 2), {"x": n((1, 2, 3, 3))}),
        GradCase("avg_pool2d", lambda x: F.avg_pool2d(x, 2), {"x": n((1, 2, 4, 4))}),
    ]


def check_case(case: GradCase, rng: np.random.Generator, eps: float = DEFAULT_EPS) -> GradCheckReport:
    """Check d(Σ weights·op(inputs)) against central differences."""
    tensors = {name: Tensor(value.copy(), requires_grad=True) for name, value in case.inputs.items()}
    sample = case.fn(**tensors)
    weights = Tensor(rng.standard_normal(sample.shape))
    return check_tensors(lambda: F.sum(case.fn(**tensors) * weights), tensors, eps=eps)


def run_ops(tol: float = DEFAULT_TOL, eps: float = DEFAULT_EPS, seed: int = 0) -> List[SuiteResult]:
    rng = np.random.default_rng(seed)
    return [SuiteResult(case.name, check_case(case, rng, eps), tol) for case in op_cases(rng)]


def run_layer(tol: float = DEFAULT_TOL, eps: float = DEFAULT_EPS, seed: int = 0) -> List[SuiteResult]:
    rng = np.random.default_rng(seed)
    c_in, c_out, k, styles = 4, 4, 3, 4
    results = []
    for strategy in ("i", "ii"):
        tensors = {
            "x": Tensor(rng.standard_normal((1, c_in, 16, 16)), requires_grad=True),
            "weight": Tensor(rng.standard_normal((c_out, c_in, k, k)) / 6.0, requires_grad=True),
            "bias": Tensor(rng.standard_normal(c_out) * 0.1, requires_grad=True),
            "s": Tensor(rng.uniform(0.5, 1.5, c_in), requires_grad=True),
            "motion": Tensor(rng.uniform(0.5, 1.5, (styles, c_in * k * k)), requires_grad=True),
        }
        weights = Tensor(rng.standard_normal((1, c_out, 16, 16)))

        def loss(t=tensors, w=weights, strategy=strategy):
            bank = FilterBank(weight=t["weight"], bias=t["bias"])
            y, _ = modconv_forward(t["x"], bank, t["s"], t["motion"], strategy=strategy)
            return F.sum(y * w)

        report = check_tensors(loss, tensors, eps=eps, max_elements=48, rng=rng)
        results.append(SuiteResult(f"modconv[{strategy}]", report, tol))
    return results


def small_configs() -> tuple:
    gen = GeneratorConfig(
        resolution=16, channels=[8, 8], const_channels=8, d_c=8, mapping_layers=1, d_z=4, d_v=4,
        motion_conv_layers=1, motion_kernel=3, anchor_spacing=4.0, k=4, d_m=8, d_h=8, motion_hidden=16,
    )
    disc = DiscriminatorConfig(disc_channels=4, disc_head_channels=8, disc_embed_dim=8, disc_time_dim=4)
    return gen, disc


def run_full(tol: float = DEFAULT_TOL, eps: float = DEFAULT_EPS, seed: int = 0,
             max_elements: int = 4) -> List[SuiteResult]:
    rng = np.random.default_rng(seed)
    gen_cfg, disc_cfg = small_configs()
    times = np.array([0.0, 1.5])
    G = GeneratorNet(gen_cfg, rng)
    D = DiscriminatorNet(disc_cfg, gen_cfg.resolution, num_items(times.size, True), rng)
    z_c = rng.standard_normal(gen_cfg.d_c)
    track = sample_motion_noise(seed, 3, gen_cfg.d_z, gen_cfg.anchor_spacing)

    def loss():
        out = G.synthesize(z_c, track, times)
        items, item_times = difference_items(out.frames, times, True)
        logit = F.reshape(D.discriminate(items, item_times), (1,))
        return generator_loss(logit) + diversity_loss(out.records)

    tensors = {f"g.{name}": p for name, p in G.named_parameters()}
    tensors.update({f"d.{name}": p for name, p in D.named_parameters()})
    report = check_tensors(loss, tensors, eps=eps, max_elements=max_elements, rng=rng)
    return [SuiteResult("generator+discriminator", report, tol)]


def run_suite(scope: str, tol: float = DEFAULT_TOL, eps: float = DEFAULT_EPS, seed: int = 0) -> List[SuiteResult]:
    if scope not in SCOPES:
        raise ValueError(f"unknown gradcheck scope '{scope}', expected one of {SCOPES}")
    runner = {"ops": run_ops, "layer": run_layer, "full": run_full}[scope]
    results = runner(tol=tol, eps=eps, seed=seed)
    failed = [r.name for r in results if not r.passed]
    logger.debug("gradcheck %s: %d cases, %d failed", scope, len(results), len(failed))
    return results


def worst_offender(results: List[SuiteResult]) -> SuiteResult:
    return max(results, key=lambda r: r.report.max_rel_error)
