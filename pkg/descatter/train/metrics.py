"""
Reconstruction quality: MSE over the pixels of one image, and Pearson correlation.
"""
import warnings

import numpy as np
import numpy.typing as npt

from descatter.autodiff import BCE_CLAMP
from descatter.errors import DegenerateCorrelationWarning, ShapeError


Pixels = npt.NDArray[np.float64]


def _pair(a: npt.ArrayLike, b: npt.ArrayLike) -> tuple[Pixels, Pixels]:
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(
            "Metrics compare images of equal size.", extensions={"a": x.shape, "b": y.shape}
        )
    return x, y


def mse(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    x, y = _pair(a, b)
    return float(np.mean((x - y) ** 2))


def corr_flagged(a: npt.ArrayLike, b: npt.ArrayLike) -> tuple[float, bool]:
    """Pearson correlation and whether it was degenerate (a constant image gives 0.0)"""
    x, y = _pair(a, b)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0, True
    dx = x - x.mean()
    dy = y - y.mean()
    r = np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy))
    return float(np.clip(r, -1.0, 1.0)), False


def corr(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    value, degenerate = corr_flagged(a, b)
    if degenerate:
        warnings.warn(
            "Correlation with a constant image is undefined, returning 0.0.",
            DegenerateCorrelationWarning,
            stacklevel=2,
        )
    return value


def bce(pred: npt.ArrayLike, target: npt.ArrayLike) -> float:
    """numpy twin of autodiff.bce_loss, for scoring without a graph"""
    p, y = _pair(pred, target)
    p = np.clip(p, BCE_CLAMP, 1 - BCE_CLAMP)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


__all__ = ["mse", "corr", "corr_flagged", "bce"]
