import pathlib
import typing as T

import pytest

from descatter.errors import ConfigError
from descatter.train import MetricsRecord, experiments
from descatter.train.experiments import (
    ExperimentKind,
    ExperimentRecipe,
    dataset_manifests,
    hybrid_fingerprint,
    load_datasets,
    prepare_datasets,
    read_report,
    run_experiment,
    summarize,
)


def tiny_recipe(run_dir: pathlib.Path, **extra: T.Any) -> ExperimentRecipe:
    return ExperimentRecipe.parse(
        {
            "run_dir": str(run_dir),
            "n": 32,
            "train_count": 4,
            "test_count": 2,
            "data_seed": 5,
            "model": {"depth": 2, "base_filters": 2},
            "mmf": {"kind": "mmf", "seed": 2, "mmf": {"modes": 64}},
            "train": {"epochs": 2, "batch_size": 2},
            **extra,
        }
    )


@pytest.fixture
def recipe(tmp_path: pathlib.Path) -> ExperimentRecipe:
    return tiny_recipe(tmp_path / "run")


### recipes


def test_model_follows_recipe_size(recipe: ExperimentRecipe) -> None:
    assert recipe.model.n == 32
    assert recipe.control_config() == recipe.train
    with pytest.raises(ConfigError):
        tiny_recipe(pathlib.Path("run"), model={"n": 16, "depth": 2})


def test_recipe_lists_missing_keys() -> None:
    with pytest.raises(ConfigError) as e:
        ExperimentRecipe.parse({"n": 32})
    assert sorted(e.value.extensions["missing"]) == ["run_dir", "train"]


def test_control_epochs_override(tmp_path: pathlib.Path) -> None:
    recipe = tiny_recipe(tmp_path, control_epochs=7)
    assert recipe.control_config().epochs == 7
    assert recipe.train.epochs == 2


def test_dataset_manifests(recipe: ExperimentRecipe, tmp_path: pathlib.Path) -> None:
    manifests = dataset_manifests(recipe)
    assert sorted(manifests) == [
        "test-diffuser",
        "test-mmf",
        "test-rotated",
        "train-diffuser",
        "train-mmf",
    ]
    # held-out objects start after the training ones
    assert manifests["test-mmf"].index_offset == recipe.train_count
    assert manifests["train-mmf"].index_offset == 0
    assert manifests["test-rotated"].rotation_step_deg == 13.0
    assert manifests["test-rotated"].channel_config == recipe.diffuser

    letters = dataset_manifests(tiny_recipe(tmp_path, letter_source="glyphs:letters"))
    assert letters["test-letters"].source == "glyphs:letters"


### datasets


def test_load_needs_prepared_data(recipe: ExperimentRecipe) -> None:
    with pytest.raises(ConfigError) as e:
        load_datasets(recipe, ["test-mmf"])
    assert e.value.extensions["step"] == "prepare_datasets"


def test_prepare_skips_current_datasets(
    recipe: ExperimentRecipe, monkeypatch: pytest.MonkeyPatch
) -> None:
    built: list[str] = []
    real_build = experiments.build_dataset

    def counting_build(manifest: T.Any, directory: pathlib.Path, **kw: T.Any) -> T.Any:
        built.append(directory.name)
        return real_build(manifest, directory, **kw)

    monkeypatch.setattr(experiments, "build_dataset", counting_build)
    prepare_datasets(recipe, ["test-mmf"])
    prepare_datasets(recipe, ["test-mmf"])
    assert built == ["test-mmf"]
    assert len(load_datasets(recipe, ["test-mmf"])["test-mmf"]) == 2

    # a changed recipe makes the stored set stale
    reseeded = recipe.model_copy(update={"data_seed": 6})
    with pytest.raises(ConfigError):
        load_datasets(reseeded, ["test-mmf"])
    prepare_datasets(reseeded, ["test-mmf"])
    assert built == ["test-mmf", "test-mmf"]


def test_prepare_unknown_dataset(recipe: ExperimentRecipe) -> None:
    with pytest.raises(ConfigError) as e:
        prepare_datasets(recipe, ["test-letters"])
    assert e.value.extensions["dataset"] == "test-letters"


### reports


def test_summarize_final_and_best() -> None:
    rows = [
        MetricsRecord(epoch=e, split="test", channel="mmf", mse=m, corr=c, loss=0.1)
        for e, m, c in [(1, 0.3, 0.2), (2, 0.1, 0.8), (3, 0.2, 0.8), (4, 0.25, 0.5)]
    ]
    rows.append(MetricsRecord(epoch=4, split="train", channel="mmf", mse=0, corr=1, loss=0))
    summary = summarize(rows, "mmf")
    assert (summary.epoch, summary.mse, summary.corr) == (4, 0.25, 0.5)
    assert (summary.best_epoch, summary.best_mse, summary.best_corr) == (2, 0.1, 0.8)
    with pytest.raises(ConfigError):
        summarize(rows, "diffuser")


### experiments


def test_hybrid(recipe: ExperimentRecipe) -> None:
    report = run_experiment("hybrid", recipe)
    assert report.kind == ExperimentKind.hybrid
    assert sorted(report.channels) == ["diffuser", "mmf"]
    assert report.channels["mmf"].epoch == 2
    assert len(report.checkpoints) >= 2
    assert "hybrid/checkpoints/final.ckpt" in report.checkpoints
    for name in report.checkpoints + report.files:
        assert (recipe.root / name).is_file()
    assert read_report(recipe.root / "hybrid" / "report.toml") == report


def test_cross_control_grid(recipe: ExperimentRecipe) -> None:
    report = run_experiment(ExperimentKind.cross_control, recipe)
    assert {(a, b) for a in report.grid for b in report.grid[a]} == {
        ("diffuser", "diffuser"),
        ("diffuser", "mmf"),
        ("mmf", "diffuser"),
        ("mmf", "mmf"),
    }
    assert report.channels == {}
    assert (recipe.root / "cross_control" / "mmf" / "metrics.csv").is_file()


def test_cross_control_compares_with_hybrid(recipe: ExperimentRecipe) -> None:
    run_experiment("hybrid", recipe)
    report = run_experiment("cross_control", recipe)
    assert sorted(report.channels) == ["hybrid-diffuser", "hybrid-mmf"]


def test_letters_needs_a_source(recipe: ExperimentRecipe) -> None:
    with pytest.raises(ConfigError) as e:
        run_experiment("letters", recipe)
    assert e.value.extensions["missing"] == ["letter_source"]
    assert not (recipe.root / "letters").exists()


def test_letters_trains_the_hybrid_model_first(tmp_path: pathlib.Path) -> None:
    recipe = tiny_recipe(tmp_path / "run", letter_source="glyphs:letters")
    report = run_experiment("letters", recipe)
    assert sorted(report.channels) == ["diffuser", "letters"]
    assert report.checkpoints == ["hybrid/checkpoints/final.ckpt"]
    assert (recipe.root / "hybrid" / "report.toml").is_file()
    assert (recipe.root / "letters" / "eval-letters.csv").is_file()


def test_hybrid_retrains_when_the_recipe_changes(
    tmp_path: pathlib.Path, monkeypatch: pytest.MonkeyPatch
) -> None:
    recipe = tiny_recipe(tmp_path / "run", letter_source="glyphs:letters")
    hybrid_report = recipe.root / "hybrid" / "report.toml"
    assert run_experiment("hybrid", recipe).fingerprint == hybrid_fingerprint(recipe)

    trained: list[int] = []
    real_run = experiments.run_hybrid

    def counting_run(r: ExperimentRecipe) -> experiments.ExperimentReport:
        trained.append(r.data_seed)
        return real_run(r)

    monkeypatch.setattr(experiments, "run_hybrid", counting_run)
    run_experiment("letters", recipe)
    assert trained == []

    reseeded = recipe.model_copy(update={"data_seed": 6})
    assert hybrid_fingerprint(reseeded) != hybrid_fingerprint(recipe)
    run_experiment("letters", reseeded)
    assert trained == [6]
    assert read_report(hybrid_report).fingerprint == hybrid_fingerprint(reseeded)

    # a hybrid model trained for another recipe is left out of the comparison
    assert run_experiment("cross_control", recipe).channels == {}


def test_fingerprint_ignores_evaluation_only_fields(recipe: ExperimentRecipe) -> None:
    moved = recipe.model_copy(update={"run_dir": "elsewhere", "rotation_step_deg": 5.0})
    assert hybrid_fingerprint(moved) == hybrid_fingerprint(recipe)
    retrained = recipe.model_copy(update={"train": recipe.train.model_copy(update={"lr": 0.1})})
    assert hybrid_fingerprint(retrained) != hybrid_fingerprint(recipe)


def test_rotated_diffuser(recipe: ExperimentRecipe) -> None:
    run_experiment("hybrid", recipe)
    report = run_experiment("rotated_diffuser", recipe)
    assert sorted(report.channels) == ["diffuser", "rotated"]
    for summary in report.channels.values():
        assert -1.0 <= summary.corr <= 1.0
    lines = (recipe.root / "rotated_diffuser" / "eval-rotated.csv").read_text().splitlines()
    assert len(lines) == 1 + recipe.test_count + 1


def test_unknown_kind(recipe: ExperimentRecipe) -> None:
    with pytest.raises(ValueError):
        run_experiment("fiber", recipe)


### full-size relative checks


@pytest.fixture(scope="module")
def full_recipe(tmp_path_factory: pytest.TempPathFactory) -> ExperimentRecipe:
    """256 + 256 training pairs at n=64, 100 epochs of the default U-net"""
    recipe = ExperimentRecipe.parse(
        {
            "run_dir": str(tmp_path_factory.mktemp("full") / "run"),
            "n": 64,
            "train_count": 256,
            "test_count": 10,
            "letter_source": "glyphs:letters",
            "workers": 4,
            "train": {"epochs": 100, "batch_size": 4, "workers": 4},
        }
    )
    run_experiment("hybrid", recipe)
    return recipe


@pytest.mark.slow
def test_cross_control_diagonal_dominates(full_recipe: ExperimentRecipe) -> None:
    grid = run_experiment("cross_control", full_recipe).grid
    diagonal = [grid[c][c].corr for c in ("diffuser", "mmf")]
    off_diagonal = [grid["diffuser"]["mmf"].corr, grid["mmf"]["diffuser"].corr]
    assert min(diagonal) > max(off_diagonal)


@pytest.mark.slow
def test_letters_near_digit_quality(full_recipe: ExperimentRecipe) -> None:
    channels = run_experiment("letters", full_recipe).channels
    assert abs(channels["letters"].corr - channels["diffuser"].corr) <= 0.2


@pytest.mark.slow
def test_rotated_keeps_most_of_the_aligned_quality(full_recipe: ExperimentRecipe) -> None:
    channels = run_experiment("rotated_diffuser", full_recipe).channels
    assert channels["rotated"].corr > 0
    assert channels["rotated"].corr >= 0.6 * channels["diffuser"].corr
