"""
Speckle/object pair datasets.

A dataset directory holds a flat-TOML `manifest` and one `pair-XXXXXX.bin` blob per
pair: magic `DSPAIR01`, n as u32 LE, then object and speckle as n*n f32 LE row-major.
The manifest carries everything needed to regenerate the blobs byte for byte, plus a
per-pair table of file names, source ids and sha256 digests.
"""
import hashlib
import logging
import pathlib
import struct
import typing as T
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from pydantic import Field, model_validator

from descatter.config import Config, read_toml_file
from descatter.errors import ConfigError, FormatError, ShapeError
from descatter.optics import (
    DIGITS,
    LETTERS,
    UINT64_MAX,
    ChannelConfig,
    ChannelKind,
    GlyphSpec,
    Image,
    apply_channel,
    free_channel,
    render_glyph,
    resize_bilinear,
)
from descatter.utils import atomic_directory, resolve_path, timed
from .idx import IdxData, load_idx_images
from .rng import derive_rng

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PAIR_MAGIC = b"DSPAIR01"
PAIR_HEADER = struct.Struct("<8sI")
MANIFEST_NAME = "manifest"

Pixels = npt.NDArray[np.float32]


@dataclass
class SamplePair:
    object_: Pixels
    speckle: Pixels
    channel_tag: str
    source_id: str

    @property
    def n(self) -> int:
        return int(self.object_.shape[0])


class PairEntry(Config):
    file: str
    source_id: str
    sha256: str = Field(pattern=r"^[0-9a-f]{64}$")


class DatasetManifest(Config):
    n: int = Field(ge=1)
    count: int = Field(ge=0)
    channel: ChannelKind
    channel_config: ChannelConfig
    master_seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    format_version: int = FORMAT_VERSION
    source: str = "glyphs"
    index_offset: int = Field(default=0, ge=0)
    rotation_step_deg: float = 0.0
    pair: dict[str, PairEntry] = {}

    @model_validator(mode="after")
    def _channel_matches(self) -> "DatasetManifest":
        if self.channel != self.channel_config.kind:
            raise ValueError(
                f"channel {self.channel.value} differs from channel_config.kind "
                f"{self.channel_config.kind.value}"
            )
        return self

    def without_pairs(self) -> "DatasetManifest":
        return self.model_copy(update={"pair": {}})

    def sample_channel(self, index: int) -> ChannelConfig:
        if self.rotation_step_deg == 0:
            return self.channel_config
        base = self.channel_config.diffuser.rotation_deg
        return self.channel_config.with_rotation(base + index * self.rotation_step_deg)


def pair_file_name(index: int) -> str:
    return f"pair-{index:06d}.bin"


def pair_key(index: int) -> str:
    return f"{index:06d}"


### sample sources


class SampleSource(T.Protocol):
    def __call__(self, index: int) -> tuple[Image, str]: ...


def glyph_source(symbols: str, kind: str, n: int, master_seed: int) -> SampleSource:
    def sample(index: int) -> tuple[Image, str]:
        symbol = symbols[index % len(symbols)]
        style_seed = int(derive_rng(master_seed, index).integers(0, 2**63))
        img = render_glyph(GlyphSpec(symbol=symbol, style_seed=style_seed), n)
        return img, f"{kind}-{symbol}/seed-{style_seed}"

    return sample


def idx_source(spec: str, n: int) -> SampleSource:
    images_path, _, labels_path = spec.partition(",")
    data: IdxData = load_idx_images(
        resolve_path(images_path), resolve_path(labels_path) if labels_path else None
    )

    def sample(index: int) -> tuple[Image, str]:
        if index >= len(data.images):
            raise ConfigError(
                f"{images_path} holds {len(data.images)} images, sample {index} requested.",
                extensions={"source": spec, "index": index},
            )
        img = data.images[index]
        if img.shape[0] != img.shape[1]:
            raise ShapeError("IDX images must be square.", extensions={"shape": img.shape})
        source_id = f"idx-{index}"
        if data.labels is not None:
            source_id += f"/label-{int(data.labels[index])}"
        return resize_bilinear(img, n), source_id

    return sample


def make_source(source: str, n: int, master_seed: int) -> SampleSource:
    """`glyphs` (digits), `glyphs:letters`, or `idx:IMAGES[,LABELS]`"""
    if source == "glyphs":
        return glyph_source(DIGITS, "digit", n, master_seed)
    if source == "glyphs:letters":
        return glyph_source(LETTERS, "letter", n, master_seed)
    if source.startswith("idx:"):
        try:
            return idx_source(source.removeprefix("idx:"), n)
        except FormatError as e:
            raise ConfigError(
                f"Bad sample source {source!r}: {e.message}",
                extensions={"source": source, **e.extensions},
                original_error=e,
            ) from e
    raise ConfigError(
        f"Unknown sample source {source!r}.",
        extensions={"source": source, "known": ["glyphs", "glyphs:letters", "idx:PATH[,LABELS]"]},
    )


### generation


def generate_dataset(manifest: DatasetManifest, *, workers: int = 1) -> list[SamplePair]:
    """
    Pair j renders source sample `index_offset + j` and pushes it through the channel.
    Each sample draws from its own derived stream, so the worker count never changes output.
    """
    source = make_source(manifest.source, manifest.n, manifest.master_seed)
    tag = manifest.channel.value

    def one(j: int) -> SamplePair:
        img, source_id = source(manifest.index_offset + j)
        obj = free_channel(img, manifest.channel_config.free)
        speckle = apply_channel(img, manifest.sample_channel(j))
        return SamplePair(
            object_=obj.astype(np.float32),
            speckle=speckle.astype(np.float32),
            channel_tag=tag,
            source_id=source_id,
        )

    with timed(f"GEN {tag}", logger):
        if workers <= 1:
            pairs = [one(j) for j in range(manifest.count)]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                pairs = list(pool.map(one, range(manifest.count)))
    logger.info(f"[GEN] {len(pairs)} {tag} pairs of {manifest.n}x{manifest.n}")
    return pairs


### blobs


def encode_pair(pair: SamplePair) -> bytes:
    n = pair.n
    if pair.object_.shape != (n, n) or pair.speckle.shape != (n, n):
        raise ShapeError(
            "object and speckle must be equal n x n images.",
            extensions={"object": pair.object_.shape, "speckle": pair.speckle.shape},
        )
    return (
        PAIR_HEADER.pack(PAIR_MAGIC, n)
        + np.ascontiguousarray(pair.object_, dtype="<f4").tobytes()
        + np.ascontiguousarray(pair.speckle, dtype="<f4").tobytes()
    )


def decode_pair(data: bytes, *, source: str = "<bytes>") -> tuple[Pixels, Pixels]:
    if len(data) < PAIR_HEADER.size:
        raise FormatError(
            f"{source}: truncated pair header.", extensions={"path": source, "offset": len(data)}
        )
    magic, n = PAIR_HEADER.unpack_from(data, 0)
    if magic != PAIR_MAGIC:
        raise FormatError(
            f"{source}: bad pair magic {magic!r}.", extensions={"path": source, "offset": 0}
        )
    expected = PAIR_HEADER.size + 2 * n * n * 4
    if len(data) != expected:
        raise FormatError(
            f"{source}: pair of n={n} needs {expected} bytes, found {len(data)}.",
            extensions={"path": source, "offset": min(len(data), expected), "n": n},
        )
    pixels = np.frombuffer(data, dtype="<f4", offset=PAIR_HEADER.size).astype(np.float32)
    obj, speckle = pixels.reshape(2, n, n)
    return obj, speckle


def read_pair_file(path: pathlib.Path) -> tuple[Pixels, Pixels]:
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FormatError(
            f"Could not read {path}: {e}", extensions={"path": str(path)}, original_error=e
        ) from e
    return decode_pair(data, source=str(path))


### directories


def write_dataset(
    pairs: T.Sequence[SamplePair], manifest: DatasetManifest, directory: pathlib.Path
) -> DatasetManifest:
    """writes into a scratch directory that replaces `directory` once complete"""
    if len(pairs) != manifest.count:
        raise ShapeError(
            f"Manifest declares {manifest.count} pairs, got {len(pairs)}.",
            extensions={"count": manifest.count, "pairs": len(pairs)},
        )
    table: dict[str, PairEntry] = {}
    blobs: list[tuple[str, bytes]] = []
    for j, pair in enumerate(pairs):
        if pair.n != manifest.n:
            raise ShapeError(
                f"Pair {j} is {pair.n}x{pair.n}, manifest says n={manifest.n}.",
                extensions={"index": j, "n": pair.n},
            )
        if pair.channel_tag != manifest.channel.value:
            raise ShapeError(
                f"Pair {j} came through {pair.channel_tag}, "
                f"manifest says {manifest.channel.value}.",
                extensions={"index": j, "channel_tag": pair.channel_tag},
            )
        blob = encode_pair(pair)
        name = pair_file_name(j)
        table[pair_key(j)] = PairEntry(
            file=name, source_id=pair.source_id, sha256=hashlib.sha256(blob).hexdigest()
        )
        blobs.append((name, blob))

    final = manifest.model_copy(update={"pair": table})
    with atomic_directory(directory) as tmp:
        for name, blob in blobs:
            (tmp / name).write_bytes(blob)
        (tmp / MANIFEST_NAME).write_text(final.to_toml(), encoding="utf-8")
    return final


def read_manifest(directory: pathlib.Path) -> DatasetManifest:
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise FormatError(f"No dataset manifest at {path}.", extensions={"path": str(path)})
    data = read_toml_file(path)
    if data.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"{path}: format_version {data.get('format_version')!r}, expected {FORMAT_VERSION}.",
            extensions={"path": str(path), "format_version": data.get("format_version")},
        )
    try:
        return DatasetManifest.parse(data)
    except ConfigError as e:
        raise FormatError(
            f"{path}: {e.message}", extensions={"path": str(path), **e.extensions}, original_error=e
        ) from e


def read_dataset(directory: pathlib.Path) -> tuple[list[SamplePair], DatasetManifest]:
    manifest = read_manifest(directory)
    pairs: list[SamplePair] = []
    for j in range(manifest.count):
        entry = manifest.pair.get(pair_key(j))
        if entry is None:
            raise FormatError(
                f"{directory}: manifest has no entry for pair {j}.",
                extensions={"path": str(directory / MANIFEST_NAME), "index": j},
            )
        path = directory / entry.file
        try:
            blob = path.read_bytes()
        except OSError as e:
            raise FormatError(
                f"Could not read {path}: {e}", extensions={"path": str(path)}, original_error=e
            ) from e
        if hashlib.sha256(blob).hexdigest() != entry.sha256:
            raise FormatError(f"{path}: checksum mismatch.", extensions={"path": str(path)})
        obj, speckle = decode_pair(blob, source=str(path))
        if obj.shape[0] != manifest.n:
            raise FormatError(
                f"{path}: n={obj.shape[0]}, manifest says n={manifest.n}.",
                extensions={"path": str(path), "offset": 8},
            )
        pairs.append(
            SamplePair(
                object_=obj,
                speckle=speckle,
                channel_tag=manifest.channel.value,
                source_id=entry.source_id,
            )
        )
    return pairs, manifest


def build_dataset(
    manifest: DatasetManifest, directory: pathlib.Path, *, workers: int = 1
) -> DatasetManifest:
    spec = manifest.without_pairs()
    return write_dataset(generate_dataset(spec, workers=workers), spec, directory)


__all__ = [
    "SamplePair",
    "PairEntry",
    "DatasetManifest",
    "SampleSource",
    "make_source",
    "generate_dataset",
    "encode_pair",
    "decode_pair",
    "read_pair_file",
    "write_dataset",
    "read_manifest",
    "read_dataset",
    "build_dataset",
    "pair_file_name",
    "FORMAT_VERSION",
    "PAIR_MAGIC",
    "MANIFEST_NAME",
]
