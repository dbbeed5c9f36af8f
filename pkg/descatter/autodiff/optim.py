import typing as T
from dataclasses import dataclass

import numpy as np
from pydantic import Field

from descatter.config import Config
from descatter.errors import ConfigError, ShapeError
from .tensor import Array, Parameter


class AdamHyper(Config):
    lr: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)


@dataclass
class AdamState:
    m: Array
    v: Array
    t: int = 0

    @classmethod
    def zeros_like(cls, param: Parameter) -> "AdamState":
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data), t=0)


def adam_step(
    params: T.Sequence[Parameter],
    state: dict[str, AdamState],
    hyper: AdamHyper | T.Mapping[str, T.Any],
) -> None:
    """bias-corrected Adam, in place on `param.data` and on `state`"""
    if not isinstance(hyper, AdamHyper):
        hyper = AdamHyper.parse(hyper)
    for param in params:
        if param.grad is None:
            raise ShapeError(
                f"Parameter {param.name} has no gradient.", extensions={"name": param.name}
            )
        s = state.get(param.name)
        if s is None:
            s = state[param.name] = AdamState.zeros_like(param)
        if s.m.shape != param.shape:
            raise ShapeError(
                f"Adam state for {param.name} does not match the parameter.",
                extensions={"state_shape": s.m.shape, "param_shape": param.shape},
            )
        g = param.grad
        s.t += 1
        s.m *= hyper.beta1
        s.m += (1 - hyper.beta1) * g
        s.v *= hyper.beta2
        s.v += (1 - hyper.beta2) * (g * g)
        m_hat = s.m / (1 - hyper.beta1**s.t)
        v_hat = s.v / (1 - hyper.beta2**s.t)
        param.data -= (hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.epsilon)).astype(param.dtype)


class Adam:
    def __init__(self, params: T.Sequence[Parameter], hyper: AdamHyper | None = None):
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ConfigError("Adam needs uniquely named parameters.", extensions={"names": names})
        self.params = list(params)
        self.hyper = hyper or AdamHyper()
        self.state: dict[str, AdamState] = {p.name: AdamState.zeros_like(p) for p in self.params}

    @property
    def t(self) -> int:
        return max((s.t for s in self.state.values()), default=0)

    def step(self) -> None:
        adam_step(self.params, self.state, self.hyper)


__all__ = ["AdamHyper", "AdamState", "Adam", "adam_step"]
