import numpy as np
import pytest

from descatter.errors import DegenerateCorrelationWarning, ShapeError
from descatter.train import bce, corr, corr_flagged, mse
from descatter.train.loop import score


def test_mse_matches_double_loop(rng: np.random.Generator) -> None:
    a, b = rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8))
    total = 0.0
    for i in range(8):
        for j in range(8):
            total += (a[i, j] - b[i, j]) ** 2
    assert mse(a, b) == pytest.approx(total / 64, rel=1e-12)


def test_corr_matches_double_loop(rng: np.random.Generator) -> None:
    a, b = rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8))
    ma, mb = a.mean(), b.mean()
    num = da = db = 0.0
    for i in range(8):
        for j in range(8):
            num += (a[i, j] - ma) * (b[i, j] - mb)
            da += (a[i, j] - ma) ** 2
            db += (b[i, j] - mb) ** 2
    assert corr(a, b) == pytest.approx(num / np.sqrt(da * db), rel=1e-12)


def test_bce_matches_double_loop(rng: np.random.Generator) -> None:
    p, y = rng.uniform(0.01, 0.99, size=(8, 8)), rng.uniform(size=(8, 8))
    total = 0.0
    for i in range(8):
        for j in range(8):
            total += y[i, j] * np.log(p[i, j]) + (1 - y[i, j]) * np.log(1 - p[i, j])
    assert bce(p, y) == pytest.approx(-total / 64, rel=1e-10)


def test_corr_extremes(rng: np.random.Generator) -> None:
    a = rng.uniform(size=(8, 8))
    assert corr(a, a) == pytest.approx(1.0)
    assert corr(a, 1 - a) == pytest.approx(-1.0)
    assert corr(a, 3 * a + 2) == pytest.approx(1.0)
    assert -1.0 <= corr(a, a) <= 1.0


def test_mse_is_zero_on_identical_images(rng: np.random.Generator) -> None:
    a = rng.uniform(size=(4, 4))
    assert mse(a, a) == 0.0


def test_constant_image_gives_flagged_zero() -> None:
    flat = np.full((4, 4), 0.3)
    value, degenerate = corr_flagged(flat, np.eye(4))
    assert (value, degenerate) == (0.0, True)
    with pytest.warns(DegenerateCorrelationWarning):
        assert corr(np.eye(4), flat) == 0.0


def test_sizes_must_match() -> None:
    with pytest.raises(ShapeError):
        mse(np.zeros((4, 4)), np.zeros((8, 8)))
    with pytest.raises(ShapeError):
        corr(np.zeros((4, 4)), np.zeros(16))


def test_score_builds_a_record(rng: np.random.Generator) -> None:
    recon, obj = rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8))
    record = score(recon, obj, epoch=3, split="test", channel="mmf", source_id="digit-1/seed-2")
    assert record.mse == mse(recon, obj)
    assert record.corr == corr(recon, obj)
    assert record.loss == bce(recon, obj)
    assert (record.epoch, record.split, record.channel) == (3, "test", "mmf")
    assert not record.degenerate
