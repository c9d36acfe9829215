import math

import numpy as np
import pytest

from autodiff import functional as F
from autodiff.gradcheck import check_tensors
from autodiff.nn import Parameter
from autodiff.tensor import Tensor
from models.mostatt_conv import AttentionRecord
from msgv_types.errors import NonFiniteError
from training.losses import (
    adversarial_losses,
    check_finite,
    diversity_loss,
    generator_loss,
    gram_norm,
    r1_parameter_grads,
    r1_penalty,
)


def record(logits, layer_id="b8.conv0"):
    logits = logits if isinstance(logits, Tensor) else Tensor(logits)
    return AttentionRecord(layer_id=layer_id, logits=logits, attended=None, probs=None)


def test_zero_logits_have_no_diversity_loss():
    assert diversity_loss({"b8.conv0": [record(np.zeros((6, 4)))]}).item() == 0.0


def test_orthonormal_logits_give_sqrt_k():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((8, 3)))
    assert gram_norm(Tensor(q)).item() == pytest.approx(math.sqrt(3), abs=1e-12)
    assert gram_norm(Tensor(q), identity_target=True).item() == pytest.approx(0.0, abs=1e-12)


def test_diversity_loss_averages_frames_then_layers():
    a = np.zeros((2, 2))
    a[0, 0] = 2.0  # gram norm 4
    b = np.eye(2)  # gram norm √2
    records = {"b8.conv0": [record(a), record(b)], "b8.conv1": [record(a)], "b16.conv0": []}
    expected = 0.5 * ((4.0 + math.sqrt(2)) / 2 + 4.0)
    assert diversity_loss(records).item() == pytest.approx(expected, abs=1e-12)
    assert diversity_loss({}).item() == 0.0


def test_diversity_loss_gradient():
    logits = Tensor(np.random.default_rng(1).standard_normal((5, 3)), requires_grad=True)
    report = check_tensors(lambda: diversity_loss({"l": [record(logits)]}), {"logits": logits})
    assert report.passed(1e-6)


def test_adversarial_losses_closed_form():
    loss_d, loss_g = adversarial_losses(Tensor(np.zeros(3)), Tensor(np.zeros(3)))
    assert loss_d.item() == pytest.approx(2.0 * math.log(2.0), abs=1e-12)
    assert loss_g.item() == pytest.approx(math.log(2.0), abs=1e-12)
    real, fake = np.array([1.0, -2.0]), np.array([0.5, 3.0])
    loss_d, loss_g = adversarial_losses(Tensor(real), Tensor(fake))
    softplus = lambda x: np.logaddexp(0.0, x)  # noqa: E731
    assert loss_d.item() == pytest.approx(softplus(fake).mean() + softplus(-real).mean(), abs=1e-12)
    assert generator_loss(Tensor(fake)).item() == pytest.approx(softplus(-fake).mean(), abs=1e-12)


def test_confident_discriminator_loss_goes_to_zero():
    loss_d, _ = adversarial_losses(Tensor(np.array([40.0])), Tensor(np.array([-40.0])))
    assert loss_d.item() < 1e-15


def linear_discriminator(a):
    return lambda x: F.sum(x * a, axis=1)


def test_r1_of_a_linear_discriminator():
    a = Parameter(np.array([1.0, -2.0, 0.5]))
    x = Tensor(np.random.default_rng(2).standard_normal((4, 3)), requires_grad=True)
    value, g = r1_penalty(linear_discriminator(a)(x), x)
    assert value == pytest.approx(0.5 * float(a.data @ a.data), abs=1e-12)
    np.testing.assert_array_equal(g, np.broadcast_to(a.data, (4, 3)))


def test_r1_parameter_gradient_without_double_backward():
    a = Parameter(np.array([1.0, -2.0, 0.5]))
    real = np.random.default_rng(3).standard_normal((4, 3))
    result = r1_parameter_grads(linear_discriminator(a), real, [a])
    assert result.value == pytest.approx(2.625, abs=1e-12)
    np.testing.assert_allclose(result.grads[id(a)], a.data, atol=1e-8)


def test_r1_parameter_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    w = Parameter(rng.standard_normal((3, 3)))
    real = rng.standard_normal((2, 3))

    def logit_fn(x):
        return F.sum(F.tanh(F.matmul(x, w)), axis=1)

    result = r1_parameter_grads(logit_fn, real, [w])
    eps = 1e-5
    numeric = np.zeros_like(w.data)
    for idx in np.ndindex(w.shape):
        original = w.data[idx]
        values = []
        for sign in (1.0, -1.0):
            w.data[idx] = original + sign * eps
            values.append(_r1_value(logit_fn, real))
        w.data[idx] = original
        numeric[idx] = (values[0] - values[1]) / (2 * eps)
    np.testing.assert_allclose(result.grads[id(w)], numeric, rtol=1e-4, atol=1e-7)


def _r1_value(logit_fn, real):
    x = Tensor(real, requires_grad=True)
    return r1_penalty(logit_fn(x), x)[0]


def test_r1_of_a_flat_discriminator_is_zero():
    a = Parameter(np.zeros(3))
    result = r1_parameter_grads(linear_discriminator(a), np.ones((2, 3)), [a])
    assert result.value == 0.0
    np.testing.assert_array_equal(result.grads[id(a)], np.zeros(3))


def test_check_finite_names_the_term():
    check_finite(3, loss_d=1.0, loss_g=-2.0)
    with pytest.raises(NonFiniteError) as err:
        check_finite(7, loss_d=1.0, loss_div=float("nan"))
    assert err.value.what == "loss_div" and err.value.step == 7
    assert "step 7" in str(err.value)


def test_diversity_loss_ignores_style_order():
    rng = np.random.default_rng(2)
    layers = {"b8.conv0": [rng.standard_normal((6, 4)) for _ in range(3)], "b16.conv1": [rng.standard_normal((8, 4))]}
    order = rng.permutation(4)
    loss = diversity_loss({k: [record(a) for a in v] for k, v in layers.items()}).item()
    permuted = diversity_loss({k: [record(a[:, order]) for a in v] for k, v in layers.items()}).item()
    assert permuted == pytest.approx(loss, abs=1e-10)
