import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from pydantic import Field, field_validator

from descatter.config import Config

# n x n real grayscale pattern, float64 inside the simulation
Image = npt.NDArray[np.float64]

UINT64_MAX = 2**64 - 1

DEFAULT_WAVELENGTH = 880e-9


class ChannelKind(str, Enum):
    free = "free"
    diffuser = "diffuser"
    mmf = "mmf"


@dataclass(frozen=True)
class ComplexField:
    values: npt.NDArray[np.complex128]
    dx: float
    wavelength: float = DEFAULT_WAVELENGTH

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


class FreeParams(Config):
    blur_sigma_px: float = Field(default=0.0, ge=0)


class DiffuserParams(Config):
    corr_len_px: float = Field(default=4.0, ge=1)
    z: float = Field(default=0.02, ge=0)
    rotation_deg: float = 0.0
    screen_oversize: int = Field(default=2, ge=1)
    dx: float = Field(default=8e-6, gt=0)
    wavelength: float = Field(default=DEFAULT_WAVELENGTH, gt=0)


class MMFParams(Config):
    modes: int = Field(default=256, gt=0)

    @field_validator("modes")
    @classmethod
    def _perfect_square(cls, v: int) -> int:
        if math.isqrt(v) ** 2 != v:
            raise ValueError(f"modes must be a perfect square, got {v}")
        return v

    @property
    def side(self) -> int:
        return math.isqrt(self.modes)


class ChannelConfig(Config):
    kind: ChannelKind
    seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    free: FreeParams = FreeParams()
    diffuser: DiffuserParams = DiffuserParams()
    mmf: MMFParams = MMFParams()

    def with_rotation(self, rotation_deg: float) -> "ChannelConfig":
        return self.model_copy(
            update={"diffuser": self.diffuser.model_copy(update={"rotation_deg": rotation_deg})}
        )


DIGITS = "0123456789"
LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


class GlyphSpec(Config):
    symbol: str = Field(min_length=1, max_length=1)
    style_seed: int = Field(default=0, ge=0, le=UINT64_MAX)


__all__ = [
    "Image",
    "ComplexField",
    "ChannelKind",
    "FreeParams",
    "DiffuserParams",
    "MMFParams",
    "ChannelConfig",
    "GlyphSpec",
    "DIGITS",
    "LETTERS",
    "UINT64_MAX",
    "DEFAULT_WAVELENGTH",
]
