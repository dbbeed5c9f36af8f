"""
Checkpoint layout, all integers u32 little-endian:

    "DSCKPT01" | len | UNetConfig as flat TOML | param count
    per parameter: len | name (utf-8) | rank | dims... | values as f32 LE
"""
import logging
import math
import pathlib
import struct

import numpy as np
import numpy.typing as npt

from descatter.config import loads_toml
from descatter.errors import ArchitectureMismatchError, ConfigError, FormatError
from descatter.model import UNetConfig, UNetModel, build_unet, conv_layout
from descatter.utils import atomic_write_bytes

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"DSCKPT01"
U32 = struct.Struct("<I")


def encode_checkpoint(model: UNetModel) -> bytes:
    names = [p.name for p in model.params]
    if len(set(names)) != len(names):
        raise ConfigError("Checkpoint parameter names must be unique.", extensions={"names": names})
    arch = model.config.to_toml().encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, U32.pack(len(arch)), arch, U32.pack(len(model.params))]
    for p in model.params:
        name = p.name.encode("utf-8")
        chunks += [U32.pack(len(name)), name, U32.pack(p.ndim)]
        chunks += [U32.pack(d) for d in p.shape]
        chunks.append(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    return b"".join(chunks)


def save_checkpoint(model: UNetModel, path: pathlib.Path) -> None:
    atomic_write_bytes(path, encode_checkpoint(model))
    logger.debug(f"saved checkpoint {path}")


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.source = source
        self.offset = 0

    def fail(self, message: str, **extensions: object) -> FormatError:
        return FormatError(
            f"{self.source}: {message}",
            extensions={"path": self.source, "offset": self.offset, **extensions},
        )

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.data):
            raise self.fail(f"truncated while reading {what}.", needed=size)
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self, what: str) -> int:
        (value,) = U32.unpack(self.take(4, what))
        return int(value)


def _architecture_diff(expected: UNetConfig, found: UNetConfig) -> list[str]:
    e, f = expected.model_dump(), found.model_dump()
    return [k for k in e if e[k] != f.get(k)]


def stored_size(config: UNetConfig) -> int:
    """bytes after the architecture block that a checkpoint of `config` takes"""
    size = U32.size
    for layer in conv_layout(config):
        shapes: dict[str, tuple[int, ...]] = {
            "weight": (layer.c_out, layer.c_in, layer.k, layer.k),
            "bias": (layer.c_out,),
        }
        for suffix, shape in shapes.items():
            name = f"{layer.name}.{suffix}".encode("utf-8")
            size += U32.size * (2 + len(shape)) + len(name) + 4 * math.prod(shape)
    return size


def _read_architecture(r: _Reader) -> UNetConfig:
    if r.take(len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        r.offset = 0
        raise r.fail("not a checkpoint (bad magic).")
    arch_len = r.u32("architecture length")
    arch_offset = r.offset
    arch = r.take(arch_len, "architecture block")
    try:
        return UNetConfig.parse(loads_toml(arch.decode("utf-8"), source=r.source))
    except (UnicodeDecodeError, ConfigError, FormatError) as e:
        r.offset = arch_offset
        raise r.fail(f"unreadable architecture block ({e}).") from e


def decode_checkpoint(
    data: bytes, *, source: str = "<bytes>", expected_config: UNetConfig | None = None
) -> UNetModel:
    r = _Reader(data, source)
    config = _read_architecture(r)

    if expected_config is not None and config != expected_config:
        fields = _architecture_diff(expected_config, config)
        raise ArchitectureMismatchError(
            f"{source}: checkpoint architecture differs in {', '.join(fields)}.",
            extensions={
                "path": source,
                "fields": fields,
                "expected": {k: getattr(expected_config, k) for k in fields},
                "found": {k: getattr(config, k) for k in fields},
            },
        )

    needed = stored_size(config)
    if len(data) - r.offset < needed:
        raise r.fail(
            f"the architecture needs {needed} more bytes, {len(data) - r.offset} remain.",
            needed=needed,
        )
    model = build_unet(config, seed=0)
    count = r.u32("parameter count")
    if count != len(model.params):
        raise r.fail(
            f"{count} parameters stored, the architecture has {len(model.params)}.",
            count=count,
        )
    state: dict[str, npt.NDArray[np.float32]] = {}
    for _ in range(count):
        try:
            name = r.take(r.u32("name length"), "parameter name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise r.fail("parameter name is not utf-8.") from e
        rank = r.u32(f"rank of {name}")
        if rank > 4:
            raise r.fail(f"rank {rank} for {name}.", name=name)
        dims = tuple(r.u32(f"dims of {name}") for _ in range(rank))
        try:
            expected_shape = model[name].shape
        except KeyError:
            raise r.fail(f"unknown parameter {name!r}.", name=name) from None
        if dims != expected_shape or name in state:
            raise r.fail(
                f"parameter {name} stored as {dims}, architecture needs {expected_shape}.",
                name=name,
                dims=dims,
            )
        raw = r.take(4 * int(np.prod(dims, dtype=np.int64)), f"values of {name}")
        state[name] = np.frombuffer(raw, dtype="<f4").reshape(dims)
    if r.offset != len(data):
        raise r.fail(f"{len(data) - r.offset} trailing bytes.")
    model.load_state_dict(state)
    return model


def _read_file(path: pathlib.Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise FormatError(
            f"Could not read {path}: {e}", extensions={"path": str(path)}, original_error=e
        ) from e


def read_checkpoint_config(path: pathlib.Path) -> UNetConfig:
    """the stored architecture alone, without building the model"""
    return _read_architecture(_Reader(_read_file(path), str(path)))


def load_checkpoint(path: pathlib.Path, expected_config: UNetConfig | None = None) -> UNetModel:
    data = _read_file(path)
    return decode_checkpoint(data, source=str(path), expected_config=expected_config)


__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "read_checkpoint_config",
    "encode_checkpoint",
    "decode_checkpoint",
    "stored_size",
    "CHECKPOINT_MAGIC",
]
