"""Parameter containers and the dense layers shared by every network."""
from __future__ import annotations

import math
from typing import Dict, Iterator, List, Tuple

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor
from msgv_types.errors import ShapeError


class Parameter(Tensor):
    """A trainable leaf tensor."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape})"


class Module:
    """
    Walks its attributes (modules, parameters, lists and dicts of them) in
    definition order, so parameter names and ordering are stable across runs.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            yield from _walk(value, f"{prefix}{name}")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        if missing:
            raise KeyError(f"missing parameters: {', '.join(missing)}")
        for name, p in params.items():
            value = np.asarray(state[name], dtype=p.data.dtype)
            if value.shape != p.shape:
                raise ShapeError(f"load {name}", value.shape, p.shape)
            p.data = value.copy()

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def _walk(value, name: str) -> Iterator[Tuple[str, Parameter]]:
    if isinstance(value, Parameter):
        yield name, value
    elif isinstance(value, Module):
        yield from value.named_parameters(prefix=f"{name}.")
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            yield from _walk(item, f"{name}.{i}")
    elif isinstance(value, dict):
        for key, item in value.items():
            yield from _walk(item, f"{name}.{key}")


class Linear(Module):
    """
    y = x @ (g·W)ᵀ + b.

    With `equalized=True` the stored weight keeps unit scale and the runtime
    gain g = 1/√fan_in is applied in the forward pass (StyleGAN equalized
    learning rate); otherwise g = 1.
    """

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        bias_init=0.0,
        init_std: float = 1.0,
        equalized: bool = True,
    ):
        self.in_features = in_features
        self.out_features = out_features
        self.gain = 1.0 / math.sqrt(in_features) if equalized else 1.0
        self.weight = Parameter(rng.standard_normal((out_features, in_features)) * init_std)
        self.bias = Parameter(np.broadcast_to(np.asarray(bias_init, dtype=np.float64), (out_features,)).copy())

    def effective_weight(self) -> Tensor:
        return self.weight * self.gain if self.gain != 1.0 else self.weight

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeError("linear", x.shape, (self.out_features, self.in_features))
        if x.ndim == 1:
            y = F.matmul(F.reshape(x, (1, -1)), F.transpose(self.effective_weight())) + self.bias
            return F.reshape(y, (self.out_features,))
        return F.matmul(x, F.transpose(self.effective_weight())) + self.bias


class MLP(Module):
    """Stack of Linear layers with leaky-relu between them (none after the last)."""

    def __init__(self, widths: List[int], rng: np.random.Generator, last_init_std: float = 1.0,
                 last_bias_init=0.0):
        self.layers = [
            Linear(
                widths[i],
                widths[i + 1],
                rng,
                init_std=last_init_std if i == len(widths) - 2 else 1.0,
                bias_init=last_bias_init if i == len(widths) - 2 else 0.0,
            )
            for i in range(len(widths) - 1)
        ]

    def forward(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = F.leaky_relu(x)
        return x


class Conv2d(Module):
    """Plain (unmodulated) convolution with equalized-lr gain and bias."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator,
                 init_std: float = 1.0):
        self.padding = kernel_size // 2
        self.gain = 1.0 / math.sqrt(in_channels * kernel_size * kernel_size)
        self.weight = Parameter(rng.standard_normal((out_channels, in_channels, kernel_size, kernel_size)) * init_std)
        self.bias = Parameter(np.zeros(out_channels))

    def forward(self, x: Tensor) -> Tensor:
        y = F.conv2d(x, self.weight * self.gain, padding=self.padding)
        return y + F.reshape(self.bias, (1, -1, 1, 1))
