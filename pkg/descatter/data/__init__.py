from .rng import derive_rng
from .idx import IdxData, parse_idx, read_idx, write_idx, load_idx_images
from .dataset import (
    SamplePair,
    PairEntry,
    DatasetManifest,
    make_source,
    generate_dataset,
    encode_pair,
    decode_pair,
    read_pair_file,
    write_dataset,
    read_manifest,
    read_dataset,
    build_dataset,
    FORMAT_VERSION,
    PAIR_MAGIC,
    MANIFEST_NAME,
)
from .checkpoint import (
    save_checkpoint,
    load_checkpoint,
    read_checkpoint_config,
    encode_checkpoint,
    decode_checkpoint,
    stored_size,
    CHECKPOINT_MAGIC,
)

__all__ = [
    "derive_rng",
    "IdxData",
    "parse_idx",
    "read_idx",
    "write_idx",
    "load_idx_images",
    "SamplePair",
    "PairEntry",
    "DatasetManifest",
    "make_source",
    "generate_dataset",
    "encode_pair",
    "decode_pair",
    "read_pair_file",
    "write_dataset",
    "read_manifest",
    "read_dataset",
    "build_dataset",
    "FORMAT_VERSION",
    "PAIR_MAGIC",
    "MANIFEST_NAME",
    "save_checkpoint",
    "load_checkpoint",
    "read_checkpoint_config",
    "encode_checkpoint",
    "decode_checkpoint",
    "stored_size",
    "CHECKPOINT_MAGIC",
]
