"""
Differentiable primitives.

Each primitive is a `Function` with a forward rule on numpy arrays and a
backward rule returning one gradient per input. The lowercase helpers at the
bottom of each section are the public API used by the models.
"""
from __future__ import annotations

from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from autodiff.tensor import Function, Tensor, as_tensor
from msgv_types.errors import ShapeError

ArrayLike = Union[Tensor, float, int, np.ndarray]


def _broadcast_shape(name: str, a: np.ndarray, b: np.ndarray) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(name, a.shape, b.shape) from None


# ---------------------------------------------------------------------------
# elementwise binary
# ---------------------------------------------------------------------------
class Add(Function):
    name = "add"

    def forward(self, a, b):
        _broadcast_shape(self.name, a, b)
        return a + b

    def backward(self, grad):
        a, b = self.inputs
        return self.unbroadcast(grad, a.shape), self.unbroadcast(grad, b.shape)


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        _broadcast_shape(self.name, a, b)
        return a - b

    def backward(self, grad):
        a, b = self.inputs
        return self.unbroadcast(grad, a.shape), self.unbroadcast(-grad, b.shape)


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        _broadcast_shape(self.name, a, b)
        return a * b

    def backward(self, grad):
        a, b = self.inputs
        return (
            self.unbroadcast(grad * b.data, a.shape),
            self.unbroadcast(grad * a.data, b.shape),
        )


class Div(Function):
    name = "div"

    def forward(self, a, b):
        _broadcast_shape(self.name, a, b)
        return a / b

    def backward(self, grad):
        a, b = self.inputs
        return (
            self.unbroadcast(grad / b.data, a.shape),
            self.unbroadcast(-grad * a.data / (b.data * b.data), b.shape),
        )


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    return Add.apply(a, b)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    return Sub.apply(a, b)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    return Mul.apply(a, b)


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    return Div.apply(a, b)


# ---------------------------------------------------------------------------
# elementwise unary
# ---------------------------------------------------------------------------
class Neg(Function):
    name = "neg"

    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class Power(Function):
    name = "pow"

    def forward(self, x, exponent: float):
        self.exponent = exponent
        return x ** exponent

    def backward(self, grad):
        (x,) = self.inputs
        p = self.exponent
        return (grad * p * x.data ** (p - 1),)


class Abs(Function):
    """|x| with subgradient 0 at the kink."""

    name = "abs"

    def forward(self, x):
        return np.abs(x)

    def backward(self, grad):
        (x,) = self.inputs
        return (grad * np.sign(x.data),)


class Exp(Function):
    name = "exp"

    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    name = "log"

    def forward(self, x):
        return np.log(x)

    def backward(self, grad):
        (x,) = self.inputs
        return (grad / x.data,)


class Sqrt(Function):
    name = "sqrt"

    def forward(self, x):
        self.out = np.sqrt(x)
        return self.out

    def backward(self, grad):
        return (grad * 0.5 / self.out,)


class Rsqrt(Function):
    name = "rsqrt"

    def forward(self, x):
        self.out = 1.0 / np.sqrt(x)
        return self.out

    def backward(self, grad):
        return (grad * -0.5 * self.out ** 3,)


class Sin(Function):
    name = "sin"

    def forward(self, x):
        return np.sin(x)

    def backward(self, grad):
        (x,) = self.inputs
        return (grad * np.cos(x.data),)


class Cos(Function):
    name = "cos"

    def forward(self, x):
        return np.cos(x)

    def backward(self, grad):
        (x,) = self.inputs
        return (-grad * np.sin(x.data),)


class Tanh(Function):
    name = "tanh"

    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out ** 2),)


class LeakyReLU(Function):
    name = "leaky_relu"

    def forward(self, x, slope: float = 0.2):
        self.slope = slope
        return np.where(x >= 0, x, slope * x)

    def backward(self, grad):
        (x,) = self.inputs
        return (grad * np.where(x.data >= 0, 1.0, self.slope),)


class Softplus(Function):
    name = "softplus"

    def forward(self, x):
        return np.logaddexp(0.0, x)

    def backward(self, grad):
        (x,) = self.inputs
        return (grad * 0.5 * (1.0 + np.tanh(0.5 * x.data)),)


def neg(x: ArrayLike) -> Tensor:
    return Neg.apply(x)


def power(x: ArrayLike, exponent: float) -> Tensor:
    return Power.apply(x, exponent=float(exponent))


def abs(x: ArrayLike) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return Abs.apply(x)


def exp(x: ArrayLike) -> Tensor:
    return Exp.apply(x)


def log(x: ArrayLike) -> Tensor:
    return Log.apply(x)


def sqrt(x: ArrayLike) -> Tensor:
    return Sqrt.apply(x)


def rsqrt(x: ArrayLike) -> Tensor:
    return Rsqrt.apply(x)


def sin(x: ArrayLike) -> Tensor:
    return Sin.apply(x)


def cos(x: ArrayLike) -> Tensor:
    return Cos.apply(x)


def tanh(x: ArrayLike) -> Tensor:
    return Tanh.apply(x)


def leaky_relu(x: ArrayLike, slope: float = 0.2) -> Tensor:
    return LeakyReLU.apply(x, slope=slope)


def softplus(x: ArrayLike) -> Tensor:
    return Softplus.apply(x)


# ---------------------------------------------------------------------------
# reductions and shape ops
# ---------------------------------------------------------------------------
def _normalize_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


class Sum(Function):
    name = "sum"

    def forward(self, x, axis=None, keepdims: bool = False):
        self.axes = _normalize_axes(axis, x.ndim)
        self.keepdims = keepdims
        return np.sum(x, axis=self.axes, keepdims=keepdims)

    def backward(self, grad):
        (x,) = self.inputs
        if not self.keepdims:
            grad = np.expand_dims(grad, self.axes)
        return (np.broadcast_to(grad, x.shape),)


class Norm(Function):
    """Frobenius norm over all elements; gradient 0 at the origin."""

    name = "norm"

    def forward(self, x):
        self.out = np.sqrt(np.sum(x * x))
        return self.out

    def backward(self, grad):
        (x,) = self.inputs
        if self.out == 0.0:
            return (np.zeros_like(x.data),)
        return (grad * x.data / self.out,)


class Reshape(Function):
    name = "reshape"

    def forward(self, x, shape):
        try:
            return np.reshape(x, shape)
        except ValueError:
            raise ShapeError(self.name, x.shape, shape) from None

    def backward(self, grad):
        (x,) = self.inputs
        return (np.reshape(grad, x.shape),)


class Transpose(Function):
    name = "transpose"

    def forward(self, x, axes=None):
        self.axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
        if sorted(self.axes) != list(range(x.ndim)):
            raise ShapeError(self.name, x.shape, self.axes)
        return np.transpose(x, self.axes)

    def backward(self, grad):
        return (np.transpose(grad, np.argsort(self.axes)),)


class BroadcastTo(Function):
    name = "broadcast_to"

    def forward(self, x, shape):
        try:
            return np.broadcast_to(x, shape).copy()
        except ValueError:
            raise ShapeError(self.name, x.shape, shape) from None

    def backward(self, grad):
        (x,) = self.inputs
        return (self.unbroadcast(grad, x.shape),)


class GetItem(Function):
    name = "getitem"

    def forward(self, x, index):
        self.index = index
        return np.array(x[index], copy=True)

    def backward(self, grad):
        (x,) = self.inputs
        out = np.zeros_like(x.data)
        parts = self.index if isinstance(self.index, tuple) else (self.index,)
        if any(isinstance(p, (np.ndarray, list)) for p in parts):
            # advanced indexing may repeat positions
            np.add.at(out, self.index, grad)
        else:
            out[self.index] += grad
        return (out,)


class Concat(Function):
    name = "concat"

    def forward(self, *arrays, axis: int = 0):
        ref = arrays[0]
        self.axis = axis % ref.ndim
        for arr in arrays[1:]:
            if arr.ndim != ref.ndim or any(
                arr.shape[d] != ref.shape[d] for d in range(ref.ndim) if d != self.axis
            ):
                raise ShapeError(self.name, ref.shape, arr.shape)
        self.splits = np.cumsum([a.shape[self.axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=self.axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


def sum(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = int(np.prod([x.shape[a] for a in _normalize_axes(axis, x.ndim)]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def norm(x: ArrayLike) -> Tensor:
    return Norm.apply(x)


def reshape(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x: ArrayLike, axes: Optional[Sequence[int]] = None) -> Tensor:
    return Transpose.apply(x, axes=axes)


def broadcast_to(x: ArrayLike, shape: Sequence[int]) -> Tensor:
    return BroadcastTo.apply(x, shape=tuple(shape))


def getitem(x: ArrayLike, index) -> Tensor:
    return GetItem.apply(x, index=index)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        t = as_tensor(t)
        ax = axis % (t.ndim + 1)
        expanded.append(reshape(t, t.shape[:ax] + (1,) + t.shape[ax:]))
    return concat(expanded, axis=axis)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------
class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError(self.name, a.shape, b.shape)
        return np.matmul(a, b)

    def backward(self, grad):
        a, b = self.inputs
        ga = np.matmul(grad, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), grad)
        return self.unbroadcast(ga, a.shape), self.unbroadcast(gb, b.shape)


class Softmax(Function):
    """Max-subtracted softmax along one axis."""

    name = "softmax"

    def forward(self, x, axis: int = -1):
        self.axis = axis
        shifted = x - np.max(x, axis=axis, keepdims=True)
        e = np.exp(shifted)
        self.out = e / np.sum(e, axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        y = self.out
        return (y * (grad - np.sum(grad * y, axis=self.axis, keepdims=True)),)


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    return MatMul.apply(a, b)


def softmax(x: ArrayLike, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


# ---------------------------------------------------------------------------
# convolutions and resampling
# ---------------------------------------------------------------------------
class Conv1d(Function):
    """x: (N, C, L), w: (O, C, k); stride 1, symmetric zero padding."""

    name = "conv1d"

    def forward(self, x, w, padding: int = 0):
        if x.ndim != 3 or w.ndim != 3 or x.shape[1] != w.shape[1]:
            raise ShapeError(self.name, x.shape, w.shape)
        self.padding = padding
        n, c, length = x.shape
        o, _, k = w.shape
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
        out_len = xp.shape[2] - k + 1
        if out_len < 1:
            raise ShapeError(self.name, x.shape, w.shape)
        windows = sliding_window_view(xp, k, axis=2)  # (N, C, Lo, k)
        self.cols = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(n * out_len, c * k)
        self.out_len = out_len
        self.padded_shape = xp.shape
        out = self.cols @ w.reshape(o, -1).T
        return out.reshape(n, out_len, o).transpose(0, 2, 1)

    def backward(self, grad):
        x, w = self.inputs
        n, c, _ = x.shape
        o, _, k = w.shape
        g2 = grad.transpose(0, 2, 1).reshape(-1, o)
        gw = (g2.T @ self.cols).reshape(w.shape)
        gcols = (g2 @ w.data.reshape(o, -1)).reshape(n, self.out_len, c, k)
        gxp = np.zeros(self.padded_shape)
        for j in range(k):
            gxp[:, :, j:j + self.out_len] += gcols[:, :, :, j].transpose(0, 2, 1)
        p = self.padding
        gx = gxp[:, :, p:gxp.shape[2] - p] if p else gxp
        return gx, gw


class Conv2d(Function):
    """x: (N, C, H, W), w: (O, C, kh, kw); stride 1, symmetric zero padding."""

    name = "conv2d"

    def forward(self, x, w, padding: int = 0):
        if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
            raise ShapeError(self.name, x.shape, w.shape)
        self.padding = padding
        n, c, _, _ = x.shape
        o, _, kh, kw = w.shape
        xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        ho, wo = xp.shape[2] - kh + 1, xp.shape[3] - kw + 1
        if ho < 1 or wo < 1:
            raise ShapeError(self.name, x.shape, w.shape)
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (N, C, Ho, Wo, kh, kw)
        self.cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)
        self.out_hw = (ho, wo)
        self.padded_shape = xp.shape
        out = self.cols @ w.reshape(o, -1).T
        return out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)

    def backward(self, grad):
        x, w = self.inputs
        n, c, _, _ = x.shape
        o, _, kh, kw = w.shape
        ho, wo = self.out_hw
        g2 = grad.transpose(0, 2, 3, 1).reshape(-1, o)
        gw = (g2.T @ self.cols).reshape(w.shape)
        gcols = (g2 @ w.data.reshape(o, -1)).reshape(n, ho, wo, c, kh, kw)
        gxp = np.zeros(self.padded_shape)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + ho, j:j + wo] += gcols[..., i, j].transpose(0, 3, 1, 2)
        p = self.padding
        gx = gxp[:, :, p:gxp.shape[2] - p, p:gxp.shape[3] - p] if p else gxp
        return gx, gw


class ZeroInsert2d(Function):
    """Insert (stride - 1) zeros between neighbouring pixels."""

    name = "zero_insert2d"

    def forward(self, x, stride: int = 2):
        self.stride = stride
        n, c, h, w = x.shape
        out = np.zeros((n, c, (h - 1) * stride + 1, (w - 1) * stride + 1))
        out[:, :, ::stride, ::stride] = x
        return out

    def backward(self, grad):
        s = self.stride
        return (np.ascontiguousarray(grad[:, :, ::s, ::s]),)


class UpsampleNearest2d(Function):
    name = "upsample_nearest2d"

    def forward(self, x, factor: int = 2):
        self.factor = factor
        return x.repeat(factor, axis=2).repeat(factor, axis=3)

    def backward(self, grad):
        n, c, h, w = grad.shape
        f = self.factor
        return (grad.reshape(n, c, h // f, f, w // f, f).sum(axis=(3, 5)),)


class AvgPool2d(Function):
    name = "avg_pool2d"

    def forward(self, x, factor: int = 2):
        n, c, h, w = x.shape
        if h % factor or w % factor:
            raise ShapeError(self.name, x.shape, (factor, factor))
        self.factor = factor
        return x.reshape(n, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))

    def backward(self, grad):
        f = self.factor
        return (grad.repeat(f, axis=2).repeat(f, axis=3) / (f * f),)


def conv1d(x: Tensor, w: Tensor, padding: int = 0) -> Tensor:
    return Conv1d.apply(x, w, padding=padding)


def conv2d(x: Tensor, w: Tensor, padding: int = 0) -> Tensor:
    return Conv2d.apply(x, w, padding=padding)


def zero_insert2d(x: Tensor, stride: int = 2) -> Tensor:
    return ZeroInsert2d.apply(x, stride=stride)


def conv_transpose2d(x: Tensor, w: Tensor, stride: int = 2, padding: int = 0) -> Tensor:
    """
    Transposed convolution, w: (C_in, C_out, kh, kw).

    Realised as zero insertion followed by an ordinary convolution with the
    spatially flipped, channel-swapped kernel.
    """
    kh, kw = w.shape[2], w.shape[3]
    if kh != kw or padding > kh - 1:
        raise ShapeError("conv_transpose2d", w.shape, (padding,))
    flipped = transpose(getitem(w, (slice(None), slice(None), slice(None, None, -1), slice(None, None, -1))), (1, 0, 2, 3))
    return conv2d(zero_insert2d(x, stride), flipped, padding=kh - 1 - padding)


def upsample_nearest2d(x: Tensor, factor: int = 2) -> Tensor:
    return UpsampleNearest2d.apply(x, factor=factor)


def avg_pool2d(x: Tensor, factor: int = 2) -> Tensor:
    return AvgPool2d.apply(x, factor=factor)


#: name -> Function class, used by the gradient-check suite
PRIMITIVES = {
    cls.name: cls
    for cls in (
        Add, Sub, Mul, Div, Neg, Power, Abs, Exp, Log, Sqrt, Rsqrt, Sin, Cos, Tanh,
        LeakyReLU, Softplus, Sum, Norm, Reshape, Transpose, BroadcastTo, GetItem,
        Concat, MatMul, Softmax, Conv1d, Conv2d, ZeroInsert2d, UpsampleNearest2d, AvgPool2d,
    )
}
