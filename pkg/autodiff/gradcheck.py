"""
Central finite-difference verification of analytic gradients.

Subgradient policy: an element is treated as sitting on a kink (abs at 0,
leaky-relu at 0) when its one-sided differences disagree by more than
`kink_tol · max(1, |central|)`. Such elements are skipped and counted in the
report instead of failing the check.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from autodiff.tensor import Tensor, no_grad
from msgv_types.errors import GradCheckError

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    max_rel_error: float = 0.0
    worst_name: str = ""
    worst_index: int = -1
    checked: int = 0
    skipped: int = 0
    per_tensor: Dict[str, float] = field(default_factory=dict)

    def passed(self, tol: float) -> bool:
        return self.max_rel_error <= tol


def _scalar(value: Tensor, what: str) -> float:
    if value.size != 1:
        raise GradCheckError(f"{what}: function must return a scalar, got shape {value.shape}")
    out = value.item()
    if not np.isfinite(out):
        raise GradCheckError(f"{what}: function is non-finite near the check point")
    return out


def check_tensors(
    loss_fn: Callable[[], Tensor],
    tensors: Dict[str, Tensor],
    eps: float = 1e-4,
    max_elements: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    kink_tol: float = 1e-2,
) -> GradCheckReport:
    """
    Compare d(loss_fn())/d(t) against central differences for every tensor.

    `loss_fn` is re-evaluated for each perturbed element, so it must read the
    tensors' current `.data`. `max_elements` samples that many elements per
    tensor (seeded by `rng`) instead of checking them all.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-6, 1e-3], got {eps}")
    rng = rng or np.random.default_rng(0)
    for t in tensors.values():
        t.data = np.ascontiguousarray(t.data)
        t.grad = None

    loss = loss_fn()
    _scalar(loss, "loss")
    loss.backward()
    with no_grad():
        f0 = _scalar(loss_fn(), "loss")

    report = GradCheckReport()
    for name, t in tensors.items():
        analytic = t.grad.reshape(-1) if t.grad is not None else np.zeros(t.size)
        flat = t.data.reshape(-1)
        indices: Iterable[int] = range(t.size)
        if max_elements is not None and t.size > max_elements:
            indices = np.sort(rng.choice(t.size, size=max_elements, replace=False))
        worst = 0.0
        for idx in indices:
            original = flat[idx]
            with no_grad():
                flat[idx] = original + eps
                fp = _scalar(loss_fn(), name)
                flat[idx] = original - eps
                fm = _scalar(loss_fn(), name)
            flat[idx] = original
            central = (fp - fm) / (2 * eps)
            forward, backward = (fp - f0) / eps, (f0 - fm) / eps
            if abs(forward - backward) > kink_tol * max(1.0, abs(central)):
                report.skipped += 1
                continue
            err = abs(analytic[idx] - central) / max(1.0, abs(analytic[idx]))
            report.checked += 1
            worst = max(worst, err)
            if err > report.max_rel_error:
                report.max_rel_error = err
                report.worst_name = name
                report.worst_index = int(idx)
        report.per_tensor[name] = worst
    logger.debug("gradcheck: %d checked, %d skipped, worst %.3e (%s)",
                 report.checked, report.skipped, report.max_rel_error, report.worst_name)
    return report


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-4, **kwargs) -> float:
    """Max relative error of df/dx; see `check_tensors` for options."""
    x.requires_grad = True
    return check_tensors(lambda: f(x), {"x": x}, eps=eps, **kwargs).max_rel_error


def grad_check_report(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-4, **kwargs) -> GradCheckReport:
    x.requires_grad = True
    return check_tensors(lambda: f(x), {"x": x}, eps=eps, **kwargs)
