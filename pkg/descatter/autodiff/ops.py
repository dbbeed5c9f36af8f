"""
The differentiable ops the U-net and its loss need, with hand-written gradients.

Layout is (batch, channel, height, width) throughout. Convolution is a
cross-correlation computed as one im2col matmul per call.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from descatter.errors import ShapeError
from .tensor import Array, Function, Tensor

BCE_CLAMP = 1e-7
# logit of 1 - BCE_CLAMP: clipping logits here matches clamping probabilities
LOGIT_CLAMP = float(np.log((1 - BCE_CLAMP) / BCE_CLAMP))


def _require_4d(name: str, t: Tensor) -> None:
    if t.ndim != 4:
        raise ShapeError(
            f"{name} expects a 4-D (batch, channel, height, width) tensor.",
            extensions={"shape": t.shape},
        )


class Conv2d(Function):
    def forward(  # type: ignore[override]
        self, x: Array, weight: Array, bias: Array, *, padding: int
    ) -> Array:
        b, c_in, h, w = x.shape
        c_out, _, k, _ = weight.shape
        self.padding = padding
        self.x_shape = x.shape
        self.k = k
        x_pad = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        # (b, c_in, h_out, w_out, k, k) -> rows of (c_in * k * k)
        windows = sliding_window_view(x_pad, (k, k), axis=(2, 3))
        h_out, w_out = windows.shape[2], windows.shape[3]
        self.out_hw = (h_out, w_out)
        self.cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * h_out * w_out, c_in * k * k)
        self.w_mat = weight.reshape(c_out, -1)
        out = self.cols @ self.w_mat.T + bias
        return np.ascontiguousarray(out.reshape(b, h_out, w_out, c_out).transpose(0, 3, 1, 2))

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        b, c_in, h, w = self.x_shape
        h_out, w_out = self.out_hw
        k, p = self.k, self.padding
        c_out = grad.shape[1]
        g = grad.transpose(0, 2, 3, 1).reshape(b * h_out * w_out, c_out)

        d_weight = None
        if self.needs_input_grad[1]:
            d_weight = (g.T @ self.cols).reshape(c_out, c_in, k, k)
        d_bias = g.sum(axis=0) if self.needs_input_grad[2] else None

        d_x = None
        if self.needs_input_grad[0]:
            d_cols = (g @ self.w_mat).reshape(b, h_out, w_out, c_in, k, k)
            d_pad = np.zeros((b, c_in, h + 2 * p, w + 2 * p), dtype=grad.dtype)
            for i in range(k):
                for j in range(k):
                    patch = d_cols[..., i, j].transpose(0, 3, 1, 2)
                    d_pad[:, :, i : i + h_out, j : j + w_out] += patch
            d_x = d_pad[:, :, p : p + h, p : p + w]
        return d_x, d_weight, d_bias


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, padding: int | None = None) -> Tensor:
    """same-size convolution by default: padding = (k - 1) / 2"""
    _require_4d("conv2d", x)
    if weight.ndim != 4 or weight.shape[2] != weight.shape[3]:
        raise ShapeError(
            "conv2d kernel must be (c_out, c_in, k, k).",
            extensions={"kernel_shape": weight.shape},
        )
    c_out, c_in, k, _ = weight.shape
    if k % 2 == 0:
        raise ShapeError(
            "conv2d kernel size must be odd.", extensions={"kernel_shape": weight.shape}
        )
    if x.shape[1] != c_in:
        raise ShapeError(
            f"conv2d input has {x.shape[1]} channels but the kernel expects {c_in}.",
            extensions={"input_shape": x.shape, "kernel_shape": weight.shape},
        )
    if bias.shape != (c_out,):
        raise ShapeError(
            "conv2d bias must have one entry per output channel.",
            extensions={"bias_shape": bias.shape, "kernel_shape": weight.shape},
        )
    if padding is None:
        padding = (k - 1) // 2
    if padding < 0 or x.shape[2] + 2 * padding < k or x.shape[3] + 2 * padding < k:
        raise ShapeError(
            "conv2d padding leaves no valid output positions.",
            extensions={"input_shape": x.shape, "kernel_shape": weight.shape, "padding": padding},
        )
    return Conv2d.apply(x, weight, bias, padding=padding)


class MaxPool2d(Function):
    def forward(self, x: Array) -> Array:  # type: ignore[override]
        b, c, h, w = x.shape
        # window entries in row-major order, so argmax picks the first of any ties
        windows = (
            x.reshape(b, c, h // 2, 2, w // 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h // 2, w // 2, 4)
        )
        self.argmax = windows.argmax(axis=-1)
        self.x_shape = x.shape
        return np.take_along_axis(windows, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        b, c, h, w = self.x_shape
        routed = np.zeros((b, c, h // 2, w // 2, 4), dtype=grad.dtype)
        np.put_along_axis(routed, self.argmax[..., None], grad[..., None], axis=-1)
        d_x = (
            routed.reshape(b, c, h // 2, w // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h, w)
        )
        return (d_x,)


def maxpool2d(x: Tensor) -> Tensor:
    _require_4d("maxpool2d", x)
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError("maxpool2d needs even height and width.", extensions={"shape": x.shape})
    return MaxPool2d.apply(x)


class UpsampleNearest2x(Function):
    def forward(self, x: Array) -> Array:  # type: ignore[override]
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        b, c, h2, w2 = grad.shape
        return (grad.reshape(b, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5)),)


def upsample_nearest2x(x: Tensor) -> Tensor:
    _require_4d("upsample_nearest2x", x)
    return UpsampleNearest2x.apply(x)


class ConcatChannels(Function):
    def forward(self, a: Array, b: Array) -> Array:  # type: ignore[override]
        self.split = a.shape[1]
        return np.concatenate([a, b], axis=1)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return grad[:, : self.split], grad[:, self.split :]


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    _require_4d("concat_channels", a)
    _require_4d("concat_channels", b)
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(
            "concat_channels needs matching batch and spatial sizes.",
            extensions={"a_shape": a.shape, "b_shape": b.shape},
        )
    return ConcatChannels.apply(a, b)


class ReLU(Function):
    def forward(self, x: Array) -> Array:  # type: ignore[override]
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (grad * self.mask,)


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


class Sigmoid(Function):
    def forward(self, x: Array) -> Array:  # type: ignore[override]
        info = np.finfo(x.dtype)
        # saturated float32 outputs would round to exactly 0 or 1
        self.out = np.clip(expit(x), info.tiny, 1 - info.epsneg).astype(x.dtype)
        return self.out

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (grad * self.out * (1 - self.out),)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


class SumAll(Function):
    def forward(self, x: Array) -> Array:  # type: ignore[override]
        self.x_shape = x.shape
        return np.asarray(x.sum(), dtype=x.dtype)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        return (np.broadcast_to(grad, self.x_shape).astype(grad.dtype),)


def sum_all(x: Tensor) -> Tensor:
    return SumAll.apply(x)


class BinaryCrossEntropy(Function):
    def forward(self, pred: Array, target: Array) -> Array:  # type: ignore[override]
        self.clamped = np.clip(pred, BCE_CLAMP, 1 - BCE_CLAMP)
        self.inside = (pred >= BCE_CLAMP) & (pred <= 1 - BCE_CLAMP)
        self.target = target
        p = self.clamped
        loss = -np.mean(target * np.log(p) + (1 - target) * np.log(1 - p))
        return np.asarray(loss, dtype=pred.dtype)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        p, y = self.clamped, self.target
        d_pred = grad * ((p - y) / (p * (1 - p))) / p.size
        return (d_pred * self.inside).astype(p.dtype), None


def bce_loss(pred: Tensor, target: Tensor) -> Tensor:
    """
    -1/(n*N) * sum_k,i,j [ y log a + (1 - y) log(1 - a) ], the mean over every pixel of every
    sample. Predictions are clamped to [1e-7, 1 - 1e-7] before the log.
    """
    if pred.shape != target.shape:
        raise ShapeError(
            "bce_loss needs pred and target of the same shape.",
            extensions={"pred_shape": pred.shape, "target_shape": target.shape},
        )
    return BinaryCrossEntropy.apply(pred, target)


class BinaryCrossEntropyWithLogits(Function):
    def forward(self, logits: Array, target: Array) -> Array:  # type: ignore[override]
        self.prob = expit(logits)
        self.target = target
        z = np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP)
        # log(1 + e^z) - z y, without overflow for large |z|
        per_pixel = np.maximum(z, 0) - z * target + np.log1p(np.exp(-np.abs(z)))
        return np.asarray(per_pixel.mean(), dtype=logits.dtype)

    def backward(self, grad: Array) -> tuple[Array | None, ...]:
        d_logits = grad * (self.prob - self.target) / self.prob.size
        return d_logits.astype(self.prob.dtype), None


def bce_with_logits(logits: Tensor, target: Tensor) -> Tensor:
    """
    bce_loss(sigmoid(logits), target) fused into one op. The gradient is
    (sigmoid(z) - y) / size everywhere; only the reported value sees the clamp.
    """
    if logits.shape != target.shape:
        raise ShapeError(
            "bce_with_logits needs logits and target of the same shape.",
            extensions={"logits_shape": logits.shape, "target_shape": target.shape},
        )
    return BinaryCrossEntropyWithLogits.apply(logits, target)


__all__ = [
    "conv2d",
    "maxpool2d",
    "upsample_nearest2x",
    "concat_channels",
    "relu",
    "sigmoid",
    "sum_all",
    "bce_loss",
    "bce_with_logits",
    "BCE_CLAMP",
    "LOGIT_CLAMP",
]
