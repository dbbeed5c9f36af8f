"""
U-net built from the autodiff ops: a contracting path of `depth` conv blocks, a
bottleneck, and an expanding path that merges each level's pre-pool activation.
"""
import typing as T
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from pydantic import Field, model_validator

from descatter.autodiff import (
    DEFAULT_DTYPE,
    Parameter,
    Tensor,
    concat_channels,
    conv2d,
    maxpool2d,
    no_grad,
    relu,
    sigmoid,
    upsample_nearest2x,
)
from descatter.config import Config
from descatter.errors import ShapeError


class UNetConfig(Config):
    n: int = Field(default=64, ge=2)
    depth: int = Field(default=5, ge=1)
    base_filters: int = Field(default=16, ge=1)
    kernel: T.Literal[3] = 3

    @model_validator(mode="after")
    def _fits_pooling(self) -> "UNetConfig":
        if self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.n % (2**self.depth) or self.n // 2**self.depth < 2:
            raise ValueError(
                f"n={self.n} is too small for depth={self.depth}: the bottleneck needs at least 2x2"
            )
        return self

    def channels(self, level: int) -> int:
        return self.base_filters * 2**level


@dataclass(frozen=True)
class ConvSpec:
    name: str
    c_in: int
    c_out: int
    k: int

    @property
    def param_count(self) -> int:
        return self.c_out * self.c_in * self.k * self.k + self.c_out


def conv_layout(config: UNetConfig) -> list[ConvSpec]:
    """every convolution of the network, in parameter order"""
    k = config.kernel
    c = config.channels
    layers: list[ConvSpec] = []
    c_prev = 1
    for i in range(config.depth):
        layers.append(ConvSpec(f"enc{i}.conv1", c_prev, c(i), k))
        layers.append(ConvSpec(f"enc{i}.conv2", c(i), c(i), k))
        c_prev = c(i)
    layers.append(ConvSpec("bottleneck.conv1", c_prev, c(config.depth), k))
    layers.append(ConvSpec("bottleneck.conv2", c(config.depth), c(config.depth), k))
    for i in reversed(range(config.depth)):
        layers.append(ConvSpec(f"dec{i}.up", c(i + 1), c(i), k))
        # the skip doubles the channels going into conv1
        layers.append(ConvSpec(f"dec{i}.conv1", 2 * c(i), c(i), k))
        layers.append(ConvSpec(f"dec{i}.conv2", c(i), c(i), k))
    layers.append(ConvSpec("head", c(0), 1, 1))
    return layers


def parameter_count(config: UNetConfig) -> int:
    return sum(layer.param_count for layer in conv_layout(config))


class UNetModel:
    def __init__(self, config: UNetConfig, params: T.Sequence[Parameter]):
        self.config = config
        self.params = list(params)
        self._by_name = {p.name: p for p in self.params}

    def __getitem__(self, name: str) -> Parameter:
        return self._by_name[name]

    @property
    def dtype(self) -> np.dtype[T.Any]:
        return self.params[0].dtype

    def _conv(self, x: Tensor, name: str) -> Tensor:
        return conv2d(x, self[f"{name}.weight"], self[f"{name}.bias"])

    def _block(self, x: Tensor, name: str) -> Tensor:
        x = relu(self._conv(x, f"{name}.conv1"))
        return relu(self._conv(x, f"{name}.conv2"))

    def logits(self, batch: Tensor) -> Tensor:
        """the head before its sigmoid; training takes the loss from these"""
        n = self.config.n
        if batch.ndim != 4 or batch.shape[1] != 1 or batch.shape[2:] != (n, n):
            raise ShapeError(
                f"The model reconstructs (B, 1, {n}, {n}) batches.",
                extensions={"input_shape": batch.shape, "n": n},
            )
        skips: list[Tensor] = []
        x = batch
        for i in range(self.config.depth):
            x = self._block(x, f"enc{i}")
            skips.append(x)
            x = maxpool2d(x)
        x = self._block(x, "bottleneck")
        for i in reversed(range(self.config.depth)):
            x = self._conv(upsample_nearest2x(x), f"dec{i}.up")
            x = self._block(concat_channels(x, skips[i]), f"dec{i}")
        return self._conv(x, "head")

    def forward(self, batch: Tensor) -> Tensor:
        return sigmoid(self.logits(batch))

    __call__ = forward

    def predict(self, speckles: npt.ArrayLike) -> npt.NDArray[np.floating[T.Any]]:
        """(B, n, n) speckles -> (B, n, n) reconstructions; records no graph"""
        x = np.asarray(speckles, dtype=self.dtype)
        if x.ndim == 2:
            x = x[None]
        with no_grad():
            out = self.forward(Tensor(x[:, None, :, :]))
        return out.data[:, 0]

    def state_dict(self) -> dict[str, npt.NDArray[np.floating[T.Any]]]:
        return {p.name: p.data.copy() for p in self.params}

    def load_state_dict(self, state: T.Mapping[str, npt.ArrayLike]) -> None:
        missing = sorted(set(self._by_name) - set(state))
        unexpected = sorted(set(state) - set(self._by_name))
        if missing or unexpected:
            raise ShapeError(
                "State does not name the model's parameters.",
                extensions={"missing": missing, "unexpected": unexpected},
            )
        for name, value in state.items():
            p = self._by_name[name]
            arr = np.asarray(value, dtype=p.dtype)
            if arr.shape != p.shape:
                raise ShapeError(
                    f"State for {name} has the wrong shape.",
                    extensions={"name": name, "shape": arr.shape, "expected": p.shape},
                )
            p.data[...] = arr

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = np.zeros_like(p.data)

    def __repr__(self) -> str:
        return f"UNetModel({self.config!r}, params={parameter_count(self.config)})"


def build_unet(
    config: UNetConfig, seed: int = 0, *, dtype: npt.DTypeLike = DEFAULT_DTYPE
) -> UNetModel:
    """He-uniform kernels drawn in layer order from one seeded stream, zero biases"""
    rng = np.random.default_rng(seed)
    params: list[Parameter] = []
    for layer in conv_layout(config):
        bound = np.sqrt(6.0 / (layer.c_in * layer.k * layer.k))
        weight = rng.uniform(-bound, bound, size=(layer.c_out, layer.c_in, layer.k, layer.k))
        params.append(Parameter(weight.astype(dtype), name=f"{layer.name}.weight"))
        params.append(Parameter(np.zeros(layer.c_out, dtype=dtype), name=f"{layer.name}.bias"))
    return UNetModel(config, params)


__all__ = ["UNetConfig", "UNetModel", "ConvSpec", "conv_layout", "parameter_count", "build_unet"]
