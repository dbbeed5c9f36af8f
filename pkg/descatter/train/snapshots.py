import io
import logging
import pathlib
import typing as T

import numpy as np
import numpy.typing as npt
from PIL import Image as PILImage

from descatter.data import SamplePair
from descatter.errors import ShapeError
from descatter.utils import atomic_write_bytes

if T.TYPE_CHECKING:
    from .loop import Reconstructor

logger = logging.getLogger(__name__)


def to_uint8(img: npt.ArrayLike) -> npt.NDArray[np.uint8]:
    x = np.asarray(img, dtype=np.float64)
    return np.rint(np.clip(x, 0.0, 1.0) * 255).astype(np.uint8)


def encode_pgm(img: npt.ArrayLike) -> bytes:
    """binary graymap (P5), 8-bit, maxval 255, row-major"""
    pixels = to_uint8(img)
    if pixels.ndim != 2:
        raise ShapeError("Graymaps are 2-D.", extensions={"shape": pixels.shape})
    buffer = io.BytesIO()
    PILImage.fromarray(pixels).save(buffer, format="PPM")
    return buffer.getvalue()


def write_pgm(path: pathlib.Path, img: npt.ArrayLike) -> None:
    atomic_write_bytes(path, encode_pgm(img))


def snapshot_strip(
    pairs: T.Sequence[SamplePair], reconstructions: npt.ArrayLike
) -> npt.NDArray[np.float64]:
    """one row per sample: object | speckle | reconstruction"""
    recon = np.asarray(reconstructions, dtype=np.float64)
    rows = [
        np.hstack([p.object_, p.speckle, r]).astype(np.float64) for p, r in zip(pairs, recon)
    ]
    return np.vstack(rows)


def write_snapshots(
    model: "Reconstructor",
    test_sets: T.Mapping[str, T.Sequence[SamplePair]],
    epoch: int,
    directory: pathlib.Path,
    count: int,
) -> list[pathlib.Path]:
    written = []
    for channel, pairs in test_sets.items():
        chosen = list(pairs[:count])
        if not chosen:
            continue
        recon = model.predict(np.stack([p.speckle for p in chosen]))
        path = directory / f"snapshot-{epoch:04d}-{channel}.pgm"
        write_pgm(path, snapshot_strip(chosen, recon))
        written.append(path)
    logger.info(f"[SNAPSHOT {epoch}] wrote {len(written)} strips to {directory}")
    return written


__all__ = ["to_uint8", "encode_pgm", "write_pgm", "snapshot_strip", "write_snapshots"]
