"""
Finite-difference checks for the hand-written gradients.

Run these in float64: with h = 1e-3 the central difference is accurate to O(h^2),
which float32 round-off would swamp.
"""
import typing as T

import numpy as np

from .tensor import Array, Tensor


def numerical_gradient(
    fn: T.Callable[[], float],
    array: Array,
    *,
    h: float = 1e-3,
    indices: T.Iterable[tuple[int, ...]] | None = None,
) -> dict[tuple[int, ...], float]:
    """central differences of `fn()` w.r.t. entries of `array`, which is perturbed in place"""
    if indices is None:
        indices = list(np.ndindex(*array.shape))
    out: dict[tuple[int, ...], float] = {}
    for idx in indices:
        original = array[idx].copy()
        array[idx] = original + h
        plus = fn()
        array[idx] = original - h
        minus = fn()
        array[idx] = original
        out[idx] = (plus - minus) / (2 * h)
    return out


def relative_error(analytic: Array, numeric: Array) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.linalg.norm(a) + np.linalg.norm(n)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(a - n) / denom)


def check_gradients(
    loss_fn: T.Callable[[], Tensor],
    inputs: T.Sequence[Tensor],
    *,
    h: float = 1e-3,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """
    Worst relative error between backward() and central differences over `inputs`.
    `max_entries` samples that many entries per input instead of checking every one.
    """
    loss = loss_fn()
    loss.backward()
    analytic = [np.array(t.grad, copy=True) for t in inputs]

    def value() -> float:
        return loss_fn().item()

    worst = 0.0
    rng = rng or np.random.default_rng(0)
    for t, grad in zip(inputs, analytic):
        all_indices = list(np.ndindex(*t.shape))
        if max_entries is not None and len(all_indices) > max_entries:
            picks = rng.choice(len(all_indices), size=max_entries, replace=False)
            all_indices = [all_indices[i] for i in sorted(picks)]
        numeric = numerical_gradient(value, t.data, h=h, indices=all_indices)
        a = np.array([grad[idx] for idx in all_indices])
        n = np.array([numeric[idx] for idx in all_indices])
        worst = max(worst, relative_error(a, n))
    return worst


__all__ = ["numerical_gradient", "relative_error", "check_gradients"]
