"""
The four experiments: one hybrid model for both channels, single-channel controls,
letters through the digit-trained model, and a rotated diffuser.

Everything lives under the recipe's run directory:

    <run_dir>/data/<dataset>/          generated pair sets
    <run_dir>/<kind>/report.toml       per-experiment report
    <run_dir>/<kind>/...               metrics CSVs, SVG plots, checkpoints, snapshots
"""
import hashlib
import logging
import pathlib
import typing as T
from enum import Enum

from pydantic import Field, model_validator

from descatter.config import Config, dumps_toml, read_toml_file
from descatter.data import (
    DatasetManifest,
    SamplePair,
    build_dataset,
    load_checkpoint,
    read_dataset,
    read_manifest,
)
from descatter.errors import ConfigError, FormatError
from descatter.model import UNetConfig, UNetModel, build_unet
from descatter.optics import UINT64_MAX, ChannelConfig, ChannelKind
from descatter.utils import atomic_write_text, resolve_path, timed
from .config import MetricsRecord, TrainConfig
from .history import write_evaluation_csv, write_history_csv
from .loop import Evaluation, TrainResult, blend_datasets, evaluate, train
from .plot import plot_history

logger = logging.getLogger(__name__)


class ExperimentKind(str, Enum):
    hybrid = "hybrid"
    cross_control = "cross_control"
    letters = "letters"
    rotated_diffuser = "rotated_diffuser"


class ExperimentRecipe(Config):
    run_dir: str
    n: int = Field(default=64, ge=2)
    train_count: int = Field(default=256, ge=1)
    test_count: int = Field(default=10, ge=1)
    data_seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    model_seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    source: str = "glyphs"
    letter_source: str | None = None
    rotation_step_deg: float = 13.0
    diffuser: ChannelConfig = ChannelConfig(kind=ChannelKind.diffuser, seed=1)
    mmf: ChannelConfig = ChannelConfig(kind=ChannelKind.mmf, seed=2)
    model: UNetConfig = UNetConfig()
    train: TrainConfig
    control_epochs: int | None = Field(default=None, ge=1)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _model_follows_n(cls, data: T.Any) -> T.Any:
        """model.n defaults to the recipe's n"""
        if isinstance(data, dict) and "n" in data:
            model = data.get("model", {})
            if isinstance(model, dict) and "n" not in model:
                return {**data, "model": {**model, "n": data["n"]}}
        return data

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentRecipe":
        if self.model.n != self.n:
            raise ValueError(f"model.n={self.model.n} differs from n={self.n}")
        if self.diffuser.kind != ChannelKind.diffuser:
            raise ValueError("diffuser.kind must be diffuser")
        if self.mmf.kind != ChannelKind.mmf:
            raise ValueError("mmf.kind must be mmf")
        return self

    @classmethod
    def from_file(cls, path: pathlib.Path) -> "ExperimentRecipe":
        return cls.parse(read_toml_file(path))

    @property
    def root(self) -> pathlib.Path:
        return resolve_path(self.run_dir)

    def control_config(self) -> TrainConfig:
        if self.control_epochs is None:
            return self.train
        return self.train.model_copy(update={"epochs": self.control_epochs})


class ChannelSummary(Config):
    mse: float
    corr: float
    loss: float
    epoch: int | None = None
    best_epoch: int | None = None
    best_mse: float | None = None
    best_corr: float | None = None
    degenerate: int = 0


class ExperimentReport(Config):
    kind: ExperimentKind
    channels: dict[str, ChannelSummary] = {}
    # training channel -> test channel
    grid: dict[str, dict[str, ChannelSummary]] = {}
    checkpoints: list[str] = []
    files: list[str] = []
    # hybrid only: hybrid_fingerprint of the recipe that trained the checkpoint
    fingerprint: str | None = None


### datasets


def dataset_manifests(recipe: ExperimentRecipe) -> dict[str, DatasetManifest]:
    """every pair set the experiments read, keyed by directory name under <run_dir>/data"""

    def manifest(
        cfg: ChannelConfig,
        count: int,
        *,
        source: str | None = None,
        offset: int = 0,
        step: float = 0.0,
    ) -> DatasetManifest:
        return DatasetManifest(
            n=recipe.n,
            count=count,
            channel=cfg.kind,
            channel_config=cfg,
            master_seed=recipe.data_seed,
            source=source or recipe.source,
            index_offset=offset,
            rotation_step_deg=step,
        )

    held_out = recipe.train_count
    out = {
        "train-diffuser": manifest(recipe.diffuser, recipe.train_count),
        "train-mmf": manifest(recipe.mmf, recipe.train_count),
        "test-diffuser": manifest(recipe.diffuser, recipe.test_count, offset=held_out),
        "test-mmf": manifest(recipe.mmf, recipe.test_count, offset=held_out),
        "test-rotated": manifest(
            recipe.diffuser, recipe.test_count, offset=held_out, step=recipe.rotation_step_deg
        ),
    }
    if recipe.letter_source is not None:
        out["test-letters"] = manifest(
            recipe.diffuser, recipe.test_count, source=recipe.letter_source
        )
    return out


REQUIRED_DATASETS: dict[ExperimentKind, list[str]] = {
    ExperimentKind.hybrid: ["train-diffuser", "train-mmf", "test-diffuser", "test-mmf"],
    ExperimentKind.cross_control: ["train-diffuser", "train-mmf", "test-diffuser", "test-mmf"],
    ExperimentKind.letters: ["test-letters", "test-diffuser"],
    ExperimentKind.rotated_diffuser: ["test-rotated", "test-diffuser"],
}


def _is_current(directory: pathlib.Path, wanted: DatasetManifest) -> bool:
    try:
        return read_manifest(directory).without_pairs() == wanted
    except FormatError:
        return False


def prepare_datasets(
    recipe: ExperimentRecipe, names: T.Iterable[str] | None = None
) -> dict[str, pathlib.Path]:
    """generation step: (re)builds the named pair sets whose manifests are out of date"""
    manifests = dataset_manifests(recipe)
    wanted = list(manifests) if names is None else list(names)
    out = {}
    for name in wanted:
        if name not in manifests:
            raise ConfigError(
                f"The recipe defines no dataset {name!r}.",
                extensions={"dataset": name, "defined": sorted(manifests)},
            )
        directory = recipe.root / "data" / name
        if not _is_current(directory, manifests[name]):
            logger.info(f"building dataset {name} in {directory}")
            build_dataset(manifests[name], directory, workers=recipe.workers)
        out[name] = directory
    return out


def load_datasets(
    recipe: ExperimentRecipe, names: T.Iterable[str]
) -> dict[str, list[SamplePair]]:
    manifests = dataset_manifests(recipe)
    out = {}
    for name in names:
        directory = recipe.root / "data" / name
        if name not in manifests or not _is_current(directory, manifests[name]):
            raise ConfigError(
                f"Dataset {name} is missing or stale; run the prepare_datasets step for it.",
                extensions={"dataset": name, "step": "prepare_datasets", "path": str(directory)},
            )
        out[name] = read_dataset(directory)[0]
    return out


### reports


def summarize(history: T.Sequence[MetricsRecord], channel: str) -> ChannelSummary:
    """final and best (highest Corr, earliest on ties) test metrics of one channel"""
    rows = sorted(
        (r for r in history if r.split == "test" and r.channel == channel), key=lambda r: r.epoch
    )
    if not rows:
        raise ConfigError(f"No test metrics for {channel}.", extensions={"channel": channel})
    final = rows[-1]
    best = max(rows, key=lambda r: (r.corr, -r.epoch))
    return ChannelSummary(
        mse=final.mse,
        corr=final.corr,
        loss=final.loss,
        epoch=final.epoch,
        best_epoch=best.epoch,
        best_mse=best.mse,
        best_corr=best.corr,
        degenerate=sum(r.degenerate for r in rows),
    )


def summarize_evaluation(evaluation: Evaluation) -> ChannelSummary:
    m = evaluation.mean
    return ChannelSummary(
        mse=m.mse, corr=m.corr, loss=m.loss, degenerate=evaluation.degenerate_count
    )


def _relative(root: pathlib.Path, paths: T.Iterable[pathlib.Path]) -> list[str]:
    return [str(p.relative_to(root)) for p in paths]


def write_report(report: ExperimentReport, directory: pathlib.Path) -> pathlib.Path:
    path = directory / "report.toml"
    atomic_write_text(path, report.to_toml())
    return path


def read_report(path: pathlib.Path) -> ExperimentReport:
    return ExperimentReport.parse(read_toml_file(path))


### experiments


def _train_run(
    recipe: ExperimentRecipe,
    directory: pathlib.Path,
    pairs: T.Sequence[SamplePair],
    test_sets: T.Mapping[str, T.Sequence[SamplePair]],
    cfg: TrainConfig,
) -> tuple[TrainResult, list[pathlib.Path]]:
    model = build_unet(recipe.model, recipe.model_seed)
    result = train(
        model,
        pairs,
        test_sets,
        cfg,
        checkpoint_dir=directory / "checkpoints",
        snapshot_dir=directory / "snapshots",
    )
    csv_path, svg_path = directory / "metrics.csv", directory / "metrics.svg"
    write_history_csv(result.history, csv_path)
    plot_history(result.history, svg_path)
    return result, [csv_path, svg_path]


def run_hybrid(recipe: ExperimentRecipe) -> ExperimentReport:
    data = load_datasets(recipe, REQUIRED_DATASETS[ExperimentKind.hybrid])
    directory = recipe.root / ExperimentKind.hybrid.value
    blended = blend_datasets(data["train-diffuser"], data["train-mmf"], recipe.train.seed)
    tests = {"diffuser": data["test-diffuser"], "mmf": data["test-mmf"]}
    result, files = _train_run(recipe, directory, blended, tests, recipe.train)
    return ExperimentReport(
        kind=ExperimentKind.hybrid,
        channels={channel: summarize(result.history, channel) for channel in tests},
        checkpoints=_relative(recipe.root, result.checkpoints),
        files=_relative(recipe.root, files),
        fingerprint=hybrid_fingerprint(recipe),
    )


def run_cross_control(recipe: ExperimentRecipe) -> ExperimentReport:
    data = load_datasets(recipe, REQUIRED_DATASETS[ExperimentKind.cross_control])
    tests = {"diffuser": data["test-diffuser"], "mmf": data["test-mmf"]}
    grid: dict[str, dict[str, ChannelSummary]] = {}
    checkpoints: list[pathlib.Path] = []
    files: list[pathlib.Path] = []
    for channel in ("diffuser", "mmf"):
        directory = recipe.root / ExperimentKind.cross_control.value / channel
        result, written = _train_run(
            recipe, directory, data[f"train-{channel}"], tests, recipe.control_config()
        )
        grid[channel] = {test: summarize(result.history, test) for test in tests}
        checkpoints += result.checkpoints
        files += written

    report = ExperimentReport(
        kind=ExperimentKind.cross_control,
        grid=grid,
        checkpoints=_relative(recipe.root, checkpoints),
        files=_relative(recipe.root, files),
    )
    if hybrid_is_current(recipe):
        # the single-channel models are judged against the hybrid one when it exists
        model = load_checkpoint(hybrid_checkpoint(recipe), recipe.model)
        channels = {
            f"hybrid-{name}": summarize_evaluation(
                evaluate(model, pairs, name, workers=recipe.train.eval_workers)
            )
            for name, pairs in tests.items()
        }
        report = report.model_copy(update={"channels": channels})
    return report


def hybrid_checkpoint(recipe: ExperimentRecipe) -> pathlib.Path:
    return recipe.root / ExperimentKind.hybrid.value / "checkpoints" / "final.ckpt"


# everything that changes what the hybrid model learns
HYBRID_FIELDS = {
    "n",
    "train_count",
    "test_count",
    "data_seed",
    "model_seed",
    "source",
    "diffuser",
    "mmf",
    "model",
    "train",
}


def hybrid_fingerprint(recipe: ExperimentRecipe) -> str:
    text = dumps_toml(recipe.model_dump(mode="json", include=HYBRID_FIELDS))
    return hashlib.sha256(text.encode()).hexdigest()


def hybrid_is_current(recipe: ExperimentRecipe) -> bool:
    """a final hybrid checkpoint exists and its report names this recipe's fingerprint"""
    if not hybrid_checkpoint(recipe).is_file():
        return False
    try:
        report = read_report(recipe.root / ExperimentKind.hybrid.value / "report.toml")
    except (FormatError, ConfigError):
        return False
    return report.fingerprint == hybrid_fingerprint(recipe)


def hybrid_model(recipe: ExperimentRecipe) -> UNetModel:
    """the digit-trained hybrid model, (re)trained first unless a current one is stored"""
    path = hybrid_checkpoint(recipe)
    if not hybrid_is_current(recipe):
        logger.info(f"no hybrid checkpoint for this recipe at {path}, training one")
        prepare_datasets(recipe, REQUIRED_DATASETS[ExperimentKind.hybrid])
        report = run_hybrid(recipe)
        write_report(report, recipe.root / ExperimentKind.hybrid.value)
    return load_checkpoint(path, recipe.model)


def _evaluate_against_aligned(
    recipe: ExperimentRecipe, kind: ExperimentKind, dataset: str, channel: str
) -> ExperimentReport:
    data = load_datasets(recipe, REQUIRED_DATASETS[kind])
    model = hybrid_model(recipe)
    directory = recipe.root / kind.value
    workers = recipe.train.eval_workers
    shifted = evaluate(model, data[dataset], channel, workers=workers)
    aligned = evaluate(model, data["test-diffuser"], "diffuser", workers=workers)
    files = [directory / f"eval-{channel}.csv", directory / "eval-diffuser.csv"]
    write_evaluation_csv(shifted.samples, shifted.mean, files[0])
    write_evaluation_csv(aligned.samples, aligned.mean, files[1])
    return ExperimentReport(
        kind=kind,
        channels={
            channel: summarize_evaluation(shifted),
            "diffuser": summarize_evaluation(aligned),
        },
        checkpoints=_relative(recipe.root, [hybrid_checkpoint(recipe)]),
        files=_relative(recipe.root, files),
    )


def run_letters(recipe: ExperimentRecipe) -> ExperimentReport:
    return _evaluate_against_aligned(recipe, ExperimentKind.letters, "test-letters", "letters")


def run_rotated_diffuser(recipe: ExperimentRecipe) -> ExperimentReport:
    return _evaluate_against_aligned(
        recipe, ExperimentKind.rotated_diffuser, "test-rotated", "rotated"
    )


RUNNERS: dict[ExperimentKind, T.Callable[[ExperimentRecipe], ExperimentReport]] = {
    ExperimentKind.hybrid: run_hybrid,
    ExperimentKind.cross_control: run_cross_control,
    ExperimentKind.letters: run_letters,
    ExperimentKind.rotated_diffuser: run_rotated_diffuser,
}


def run_experiment(
    kind: ExperimentKind | str, recipe: ExperimentRecipe, *, prepare: bool = True
) -> ExperimentReport:
    """
    Generate what the experiment reads (unless `prepare` is off), run it, and write
    `<run_dir>/<kind>/report.toml`.
    """
    kind = ExperimentKind(kind)
    if kind == ExperimentKind.letters and recipe.letter_source is None:
        raise ConfigError(
            "The letters experiment needs a letter_source (e.g. glyphs:letters or idx:PATH).",
            extensions={"missing": ["letter_source"]},
        )
    if prepare:
        prepare_datasets(recipe, REQUIRED_DATASETS[kind])
    with timed(f"EXPERIMENT {kind.value}", logger):
        report = RUNNERS[kind](recipe)
    write_report(report, recipe.root / kind.value)
    return report


__all__ = [
    "ExperimentKind",
    "ExperimentRecipe",
    "ChannelSummary",
    "ExperimentReport",
    "dataset_manifests",
    "prepare_datasets",
    "load_datasets",
    "summarize",
    "summarize_evaluation",
    "write_report",
    "read_report",
    "hybrid_model",
    "hybrid_checkpoint",
    "hybrid_fingerprint",
    "hybrid_is_current",
    "run_hybrid",
    "run_cross_control",
    "run_letters",
    "run_rotated_diffuser",
    "run_experiment",
    "REQUIRED_DATASETS",
]
