"""
Forward maps of the three scattering channels. Every channel is a pure function of
(image, ChannelConfig); the seeded random media are memoized per parameterization.
"""
import logging
import threading

import numpy as np
import numpy.typing as npt
from scipy import ndimage
from scipy.stats import unitary_group

from descatter.errors import ConfigError
from descatter.utils import CacheDict
from .image_ops import as_image, block_average, normalize, resize_bilinear
from .models import ChannelConfig, ChannelKind, ComplexField, FreeParams, Image
from .propagation import make_phase_screen, propagate_angular_spectrum

logger = logging.getLogger(__name__)

SCREEN_CACHE: CacheDict[tuple[int, float, int], npt.NDArray[np.float64]] = CacheDict(
    cache_len=16
)
MATRIX_CACHE: CacheDict[tuple[int, int], npt.NDArray[np.complex128]] = CacheDict(cache_len=4)
_cache_lock = threading.Lock()


def _frozen(a: npt.NDArray[np.generic]) -> npt.NDArray[np.generic]:
    a.flags.writeable = False
    return a


def cached_phase_screen(n: int, corr_len_px: float, seed: int) -> npt.NDArray[np.float64]:
    key = (n, corr_len_px, seed)
    with _cache_lock:
        if key in SCREEN_CACHE:
            return SCREEN_CACHE[key]
    screen = _frozen(make_phase_screen(n, corr_len_px, seed))
    with _cache_lock:
        SCREEN_CACHE[key] = screen
    return screen


def transmission_matrix(modes: int, seed: int) -> npt.NDArray[np.complex128]:
    """Haar-random unitary (complex Gaussian matrix orthonormalized by QR), fixed by `seed`."""
    key = (modes, seed)
    with _cache_lock:
        if key in MATRIX_CACHE:
            return MATRIX_CACHE[key]
    rng = np.random.default_rng(seed)
    u = _frozen(np.asarray(unitary_group.rvs(modes, random_state=rng), dtype=np.complex128))
    with _cache_lock:
        MATRIX_CACHE[key] = u
    return u


def rotated_screen(cfg: ChannelConfig, n: int) -> npt.NDArray[np.float64]:
    """central n x n crop of the oversized screen after rotating it about the grid center"""
    params = cfg.diffuser
    big_n = params.screen_oversize * n
    screen = cached_phase_screen(big_n, params.corr_len_px, cfg.seed)
    if params.rotation_deg != 0:
        screen = ndimage.rotate(
            screen, params.rotation_deg, reshape=False, order=0, mode="grid-wrap"
        )
    start = (big_n - n) // 2
    return screen[start : start + n, start : start + n]


def free_channel(img: npt.ArrayLike, params: FreeParams | None = None) -> Image:
    x = normalize(img)
    if params is not None and params.blur_sigma_px > 0:
        x = normalize(ndimage.gaussian_filter(x, params.blur_sigma_px, mode="nearest"))
    return x


def diffuser_channel(img: npt.ArrayLike, cfg: ChannelConfig) -> Image:
    if cfg.kind != ChannelKind.diffuser:
        raise ConfigError(
            "diffuser_channel needs a diffuser ChannelConfig.", extensions={"kind": cfg.kind.value}
        )
    x = as_image(img)
    n = x.shape[0]
    screen = rotated_screen(cfg, n)
    field = np.sqrt(np.clip(x, 0, None)) * np.exp(1j * screen)
    out = propagate_angular_spectrum(
        ComplexField(values=field, dx=cfg.diffuser.dx, wavelength=cfg.diffuser.wavelength),
        cfg.diffuser.z,
    )
    return normalize(np.abs(out.values) ** 2)


def mmf_channel(img: npt.ArrayLike, cfg: ChannelConfig) -> Image:
    if cfg.kind != ChannelKind.mmf:
        raise ConfigError(
            "mmf_channel needs an mmf ChannelConfig.", extensions={"kind": cfg.kind.value}
        )
    x = as_image(img)
    n = x.shape[0]
    m = cfg.mmf.side
    if m > n:
        raise ConfigError(
            "The fiber has more modes than the image has pixels.",
            extensions={"n": n, "modes": cfg.mmf.modes, "side": m},
        )
    v = block_average(np.sqrt(np.clip(x, 0, None)), m).astype(np.complex128).ravel()
    out = transmission_matrix(cfg.mmf.modes, cfg.seed) @ v
    intensity = (np.abs(out) ** 2).reshape(m, m)
    return normalize(resize_bilinear(intensity, n))


def apply_channel(img: npt.ArrayLike, cfg: ChannelConfig) -> Image:
    match cfg.kind:
        case ChannelKind.free:
            return free_channel(img, cfg.free)
        case ChannelKind.diffuser:
            return diffuser_channel(img, cfg)
        case ChannelKind.mmf:
            return mmf_channel(img, cfg)
    raise ConfigError(f"Unknown channel kind {cfg.kind!r}.")


__all__ = [
    "free_channel",
    "diffuser_channel",
    "mmf_channel",
    "apply_channel",
    "transmission_matrix",
    "cached_phase_screen",
    "rotated_screen",
    "SCREEN_CACHE",
    "MATRIX_CACHE",
]
