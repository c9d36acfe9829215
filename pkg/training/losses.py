"""Adversarial, diversity and R1 loss terms."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor, grad
from models.mostatt_conv import AttentionRecord
from msgv_types.errors import NonFiniteError

R1_FD_STEP = 1e-3


def gram_norm(logits: Tensor, identity_target: bool = False) -> Tensor:
    """‖AᵀA‖_F (or ‖AᵀA − I‖_F) of one (c_out, K) logit matrix."""
    gram = F.matmul(F.transpose(logits), logits)
    if identity_target:
        gram = gram - np.eye(gram.shape[0])
    return F.norm(gram)


def diversity_loss(records: Mapping[str, Sequence[AttentionRecord]], identity_target: bool = False) -> Tensor:
    """Per layer, the mean over frames of the gram norm; then the mean over layers."""
    per_layer: List[Tensor] = []
    for layer_id, layer_records in records.items():
        if not layer_records:
            continue
        total = gram_norm(layer_records[0].logits, identity_target)
        for record in layer_records[1:]:
            total = total + gram_norm(record.logits, identity_target)
        per_layer.append(total * (1.0 / len(layer_records)))
    if not per_layer:
        return Tensor(0.0)
    loss = per_layer[0]
    for term in per_layer[1:]:
        loss = loss + term
    return loss * (1.0 / len(per_layer))


def adversarial_losses(logit_real: Tensor, logit_fake: Tensor) -> Tuple[Tensor, Tensor]:
    """
    Non-saturating logistic losses, averaged over the batch:
    loss_D = softplus(fake) + softplus(−real), loss_G = softplus(−fake).
    """
    loss_d = F.mean(F.softplus(logit_fake)) + F.mean(F.softplus(-logit_real))
    return loss_d, generator_loss(logit_fake)


def generator_loss(logit_fake: Tensor) -> Tensor:
    return F.mean(F.softplus(-logit_fake))


def r1_penalty(logit_real: Tensor, real_inputs: Tensor) -> Tuple[float, np.ndarray]:
    """
    ½‖∂logit/∂x‖² averaged over the batch, and the input gradient itself.

    `logit_real` holds one logit per batch entry; entries must not interact.
    """
    (g,) = grad(F.sum(logit_real), [real_inputs])
    batch = max(logit_real.size, 1)
    return 0.5 * float(np.sum(g * g)) / batch, g


@dataclass
class R1Result:
    value: float
    grads: Dict[int, np.ndarray]


def r1_parameter_grads(
    logit_fn: Callable[[Tensor], Tensor],
    real: np.ndarray,
    params: Sequence[Tensor],
    step: float = R1_FD_STEP,
) -> R1Result:
    """
    R1 value and its gradient w.r.t. `params` without double backward.

    Uses ∇_θ ½‖∇_x D‖² = d/dε ∇_θ D(x + ε·∇_x D) at ε = 0, taken as a central
    difference with ε = step / rms(∇_x D).
    """
    x = Tensor(real, requires_grad=True)
    logits = logit_fn(x)
    value, g = r1_penalty(logits, x)
    if not np.isfinite(value):
        raise NonFiniteError("r1")
    batch = max(logits.size, 1)
    rms = float(np.sqrt(np.mean(g * g)))
    if rms == 0.0:
        return R1Result(value=value, grads={id(p): np.zeros_like(p.data) for p in params})
    eps = step / rms
    plus = grad(F.sum(logit_fn(Tensor(real + eps * g))), params)
    minus = grad(F.sum(logit_fn(Tensor(real - eps * g))), params)
    grads = {id(p): (gp - gm) / (2.0 * eps * batch) for p, gp, gm in zip(params, plus, minus)}
    return R1Result(value=value, grads=grads)


def check_finite(step: int, **terms: float) -> None:
    for name, value in terms.items():
        if not np.isfinite(value):
            raise NonFiniteError(name, step=step)
