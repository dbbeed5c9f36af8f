from .config import TrainConfig, MetricsRecord, ChannelTag, Split
from .metrics import mse, corr, corr_flagged, bce
from .history import (
    HISTORY_HEADER,
    EVALUATION_HEADER,
    history_csv,
    evaluation_csv,
    write_history_csv,
    read_history_csv,
    write_evaluation_csv,
)
from .snapshots import encode_pgm, write_pgm, write_snapshots
from .loop import Reconstructor, Evaluation, TrainResult, blend_datasets, evaluate, train
from .plot import plot_history, render_history_svg
from .experiments import (
    ExperimentKind,
    ExperimentRecipe,
    ExperimentReport,
    ChannelSummary,
    prepare_datasets,
    run_experiment,
    read_report,
)

__all__ = [
    "TrainConfig",
    "MetricsRecord",
    "ChannelTag",
    "Split",
    "mse",
    "corr",
    "corr_flagged",
    "bce",
    "HISTORY_HEADER",
    "EVALUATION_HEADER",
    "history_csv",
    "evaluation_csv",
    "write_history_csv",
    "read_history_csv",
    "write_evaluation_csv",
    "encode_pgm",
    "write_pgm",
    "write_snapshots",
    "Reconstructor",
    "Evaluation",
    "TrainResult",
    "blend_datasets",
    "evaluate",
    "train",
    "plot_history",
    "render_history_svg",
    "ExperimentKind",
    "ExperimentRecipe",
    "ExperimentReport",
    "ChannelSummary",
    "prepare_datasets",
    "run_experiment",
    "read_report",
]
