import numpy as np
import numpy.typing as npt
from scipy import ndimage

from descatter.errors import ConfigError, ShapeError
from .models import Image


def as_image(pixels: npt.ArrayLike) -> Image:
    img = np.asarray(pixels, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ShapeError("Images are square 2-D arrays.", extensions={"shape": img.shape})
    return img


def normalize(img: npt.ArrayLike) -> Image:
    """min-max to [0, 1]; a constant image maps to all zeros"""
    x = as_image(img)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def resize_bilinear(img: npt.ArrayLike, target_n: int) -> Image:
    """align-corners bilinear upsampling, corner pixels are kept exactly"""
    x = as_image(img)
    n = x.shape[0]
    if target_n < n:
        raise ConfigError(
            "resize_bilinear only upsamples.", extensions={"source_n": n, "target_n": target_n}
        )
    if target_n == n:
        return x.copy()
    coords = np.linspace(0, n - 1, target_n)
    rows, cols = np.meshgrid(coords, coords, indexing="ij")
    return ndimage.map_coordinates(x, [rows, cols], order=1, mode="nearest")


def block_average(img: npt.ArrayLike, m: int) -> npt.NDArray[np.generic]:
    """
    n x n -> m x m by averaging non-overlapping blocks; complex input is fine. Block edges
    sit at floor(k * n / m), so when m does not divide n the blocks differ by one pixel.
    """
    x = np.asarray(img)
    n = x.shape[0]
    if not 1 <= m <= n:
        raise ConfigError("block_average needs 1 <= m <= n.", extensions={"n": n, "m": m})
    edges = np.arange(m + 1) * n // m
    sizes = np.diff(edges)
    sums = np.add.reduceat(np.add.reduceat(x, edges[:-1], axis=0), edges[:-1], axis=1)
    return sums / np.outer(sizes, sizes)


__all__ = ["as_image", "normalize", "resize_bilinear", "block_average"]
