import math

import numpy as np
import numpy.typing as npt
from scipy import fft

from descatter.errors import ConfigError
from .models import ComplexField

# phase std of a strongly scattering ground-glass plate
SCREEN_PHASE_STD = 2 * np.pi


def transfer_function(n: int, dx: float, wavelength: float, z: float) -> npt.NDArray[np.complex128]:
    k = 2 * np.pi / wavelength
    kx = 2 * np.pi * fft.fftfreq(n, d=dx)
    kx2, ky2 = np.meshgrid(kx**2, kx**2, indexing="ij")
    kz2 = k**2 - kx2 - ky2
    propagating = kz2 > 0
    kz = np.sqrt(np.where(propagating, kz2, 0.0))
    return np.where(propagating, np.exp(1j * z * kz), 0.0)


def propagate_angular_spectrum(f: ComplexField, z: float) -> ComplexField:
    """
    Scalar free-space propagation over `z` meters: the 2-D spectrum is multiplied by
    exp(i z sqrt(k^2 - kx^2 - ky^2)); evanescent components are dropped.
    """
    if z < 0:
        raise ConfigError("propagation distance must be >= 0.", extensions={"z": z})
    h = transfer_function(f.n, f.dx, f.wavelength, z)
    out = fft.ifft2(fft.fft2(f.values) * h)
    return ComplexField(values=out, dx=f.dx, wavelength=f.wavelength)


def correlated_gaussian_field(
    n: int, corr_len_px: float, rng: np.random.Generator
) -> npt.NDArray[np.float64]:
    """
    Zero-mean, unit-std Gaussian field whose autocorrelation is exp(-ln2 * r^2 / corr_len^2),
    i.e. falls to one half at r = corr_len_px. White noise filtered in the frequency domain.
    """
    noise = rng.standard_normal((n, n))
    f = fft.fftfreq(n)
    f2 = f[:, None] ** 2 + f[None, :] ** 2
    gain = np.exp(-(np.pi**2) * f2 * corr_len_px**2 / (2 * math.log(2)))
    field = fft.ifft2(fft.fft2(noise) * gain).real
    field -= field.mean()
    return field / field.std()


def make_phase_screen(n: int, corr_len_px: float, seed: int) -> npt.NDArray[np.float64]:
    """seeded thin-diffuser phase, std 2*pi before wrapping into (-pi, pi]"""
    if n < 32 or corr_len_px < 1:
        raise ConfigError(
            "phase screens need n >= 32 and corr_len_px >= 1.",
            extensions={"n": n, "corr_len_px": corr_len_px},
        )
    rng = np.random.default_rng(seed)
    phase = SCREEN_PHASE_STD * correlated_gaussian_field(n, corr_len_px, rng)
    return wrap_phase(phase)


def wrap_phase(phase: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    wrapped = np.mod(phase + np.pi, 2 * np.pi) - np.pi
    # np.mod lands on -pi for odd multiples of pi; the interval is (-pi, pi]
    return np.where(wrapped <= -np.pi, np.pi, wrapped)


__all__ = [
    "propagate_angular_spectrum",
    "transfer_function",
    "correlated_gaussian_field",
    "make_phase_screen",
    "wrap_phase",
    "SCREEN_PHASE_STD",
]
