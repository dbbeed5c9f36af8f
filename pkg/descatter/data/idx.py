"""
IDX tensors (the MNIST/EMNIST container): a big-endian magic `00 00 08 <ndim>`,
one big-endian u32 per dimension, then the unsigned bytes row-major.
"""
import pathlib
import struct
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from descatter.errors import FormatError
from descatter.optics.models import Image
from descatter.utils import atomic_write_bytes

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


@dataclass
class IdxData:
    images: list[Image]
    labels: npt.NDArray[np.uint8] | None = None


def parse_idx(data: bytes, *, source: str = "<bytes>") -> npt.NDArray[np.uint8]:
    if len(data) < 4:
        raise FormatError(
            f"{source}: truncated IDX header.", extensions={"path": source, "offset": len(data)}
        )
    (magic,) = struct.unpack_from(">I", data, 0)
    if magic not in (IMAGES_MAGIC, LABELS_MAGIC):
        raise FormatError(
            f"{source}: bad IDX magic 0x{data[:4].hex()}.", extensions={"path": source, "offset": 0}
        )
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise FormatError(
            f"{source}: truncated IDX dimensions.",
            extensions={"path": source, "offset": len(data)},
        )
    dims = struct.unpack_from(f">{ndim}I", data, 4)
    expected = header_len + int(np.prod(dims, dtype=np.int64))
    if len(data) != expected:
        raise FormatError(
            f"{source}: IDX payload holds {len(data) - header_len} bytes, dims {dims} need "
            f"{expected - header_len}.",
            extensions={"path": source, "offset": min(len(data), expected), "dims": dims},
        )
    return np.frombuffer(data, dtype=np.uint8, offset=header_len).reshape(dims)


def read_idx(path: pathlib.Path) -> IdxData:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(
            f"Could not read {path}: {e}", extensions={"path": str(path)}, original_error=e
        ) from e
    array = parse_idx(data, source=str(path))
    if array.ndim == 1:
        return IdxData(images=[], labels=array.copy())
    return IdxData(images=[img.astype(np.float64) / 255.0 for img in array])


def write_idx(path: pathlib.Path, array: npt.ArrayLike) -> None:
    """float input is taken to be in [0, 1] and quantized to bytes"""
    a = np.asarray(array)
    if a.ndim not in (1, 3):
        raise FormatError(
            "IDX files hold label vectors or stacks of 2-D images.",
            extensions={"path": str(path), "shape": a.shape},
        )
    if a.dtype != np.uint8:
        a = np.rint(np.clip(a, 0.0, 1.0) * 255).astype(np.uint8)
    magic = IMAGES_MAGIC if a.ndim == 3 else LABELS_MAGIC
    header = struct.pack(">I", magic) + struct.pack(f">{a.ndim}I", *a.shape)
    atomic_write_bytes(path, header + a.tobytes(order="C"))


def load_idx_images(
    images_path: pathlib.Path,
    labels_path: pathlib.Path | None = None,
    *,
    transpose: bool = False,
) -> IdxData:
    """`transpose` undoes the column-major storage of EMNIST letters"""
    out = read_idx(images_path)
    if not out.images:
        raise FormatError(
            f"{images_path} holds labels, not images.", extensions={"path": str(images_path)}
        )
    if transpose:
        out.images = [img.T.copy() for img in out.images]
    if labels_path is not None:
        labels = read_idx(labels_path).labels
        if labels is None or len(labels) != len(out.images):
            raise FormatError(
                f"{labels_path} does not label the {len(out.images)} images of {images_path}.",
                extensions={"path": str(labels_path)},
            )
        out.labels = labels
    return out


__all__ = [
    "IdxData",
    "parse_idx",
    "read_idx",
    "write_idx",
    "load_idx_images",
    "IMAGES_MAGIC",
    "LABELS_MAGIC",
]
