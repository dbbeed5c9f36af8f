from .errors import (
    DescatterError,
    ShapeError,
    ConfigError,
    FormatError,
    ArchitectureMismatchError,
    StateError,
    TrainingError,
    DegenerateCorrelationWarning,
)
from .config import Config
from .autodiff import (
    Tensor,
    Parameter,
    no_grad,
    Adam,
    AdamHyper,
    adam_step,
    bce_loss,
    bce_with_logits,
)
from .optics import (
    ChannelConfig,
    ChannelKind,
    GlyphSpec,
    apply_channel,
    free_channel,
    diffuser_channel,
    mmf_channel,
    render_glyph,
)
from .data import (
    SamplePair,
    DatasetManifest,
    derive_rng,
    generate_dataset,
    write_dataset,
    read_dataset,
    read_idx,
    save_checkpoint,
    load_checkpoint,
)
from .model import UNetConfig, UNetModel, build_unet
from .train import (
    TrainConfig,
    MetricsRecord,
    mse,
    corr,
    blend_datasets,
    train,
    evaluate,
    ExperimentKind,
    ExperimentRecipe,
    run_experiment,
)

__all__ = [
    "DescatterError",
    "ShapeError",
    "ConfigError",
    "FormatError",
    "ArchitectureMismatchError",
    "StateError",
    "TrainingError",
    "DegenerateCorrelationWarning",
    "Config",
    "Tensor",
    "Parameter",
    "no_grad",
    "Adam",
    "AdamHyper",
    "adam_step",
    "bce_loss",
    "bce_with_logits",
    "ChannelConfig",
    "ChannelKind",
    "GlyphSpec",
    "apply_channel",
    "free_channel",
    "diffuser_channel",
    "mmf_channel",
    "render_glyph",
    "SamplePair",
    "DatasetManifest",
    "derive_rng",
    "generate_dataset",
    "write_dataset",
    "read_dataset",
    "read_idx",
    "save_checkpoint",
    "load_checkpoint",
    "UNetConfig",
    "UNetModel",
    "build_unet",
    "TrainConfig",
    "MetricsRecord",
    "mse",
    "corr",
    "blend_datasets",
    "train",
    "evaluate",
    "ExperimentKind",
    "ExperimentRecipe",
    "run_experiment",
]
