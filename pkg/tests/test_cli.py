import pathlib

import pytest

from descatter.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from descatter.data import read_manifest
from descatter.train import read_history_csv


def gen(out: pathlib.Path, channel: str, *flags: str, n: int = 32, count: int = 3) -> int:
    argv = ["gen", "--channel", channel, "--n", str(n), "--count", str(count)]
    argv += ["--seed", "7", "--modes", "64", "--out", str(out), *flags]
    return main(argv)


def tree(directory: pathlib.Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


@pytest.fixture
def datasets(workdir: pathlib.Path) -> tuple[pathlib.Path, pathlib.Path]:
    assert gen(workdir / "diffuser", "diffuser") == EXIT_OK
    assert gen(workdir / "mmf", "mmf") == EXIT_OK
    return workdir / "diffuser", workdir / "mmf"


def train_argv(
    workdir: pathlib.Path, data: str, ckpt: str, *flags: str, epochs: int = 1
) -> list[str]:
    return [
        "train",
        "--data",
        data,
        "--epochs",
        str(epochs),
        "--ckpt",
        str(workdir / ckpt),
        "--depth",
        "2",
        "--base-filters",
        "2",
        "--batch-size",
        "2",
        *flags,
    ]


### gen


def test_gen_is_reproducible(workdir: pathlib.Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert gen(workdir / "a", "diffuser") == EXIT_OK
    assert gen(workdir / "b", "diffuser") == EXIT_OK
    assert "wrote 3 diffuser pairs" in capsys.readouterr().out
    a = tree(workdir / "a")
    assert sorted(a) == ["manifest", "pair-000000.bin", "pair-000001.bin", "pair-000002.bin"]
    assert a == tree(workdir / "b")


def test_gen_flags_reach_the_manifest(workdir: pathlib.Path) -> None:
    flags = ("--medium-seed", "9", "--offset", "4", "--rotation-step-deg", "13")
    assert gen(workdir / "d", "diffuser", *flags) == EXIT_OK
    manifest = read_manifest(workdir / "d")
    assert manifest.channel_config.seed == 9
    assert manifest.index_offset == 4
    assert manifest.rotation_step_deg == 13.0
    assert manifest.pair["000000"].source_id.startswith("digit-4/seed-")


def test_gen_bad_source_is_a_runtime_error(
    workdir: pathlib.Path, capsys: pytest.CaptureFixture[str]
) -> None:
    code = gen(workdir / "d", "diffuser", "--source", f"idx:{workdir / 'missing.idx'}")
    assert code == EXIT_RUNTIME
    assert "error:" in capsys.readouterr().err
    assert not (workdir / "d").exists()


def test_gen_invalid_settings_are_usage_errors(workdir: pathlib.Path) -> None:
    assert gen(workdir / "d", "mmf", "--z", "-1") == EXIT_USAGE
    assert main(["gen", "--channel", "laser", "--count", "1", "--out", "x"]) == EXIT_USAGE


### train / eval / predict / plot


def test_usage_errors(workdir: pathlib.Path) -> None:
    assert main(train_argv(workdir, "d", "ckpt", epochs=0)) == EXIT_USAGE
    assert main(["train", "--epochs", "1"]) == EXIT_USAGE
    assert main(["eval", "--unknown-flag"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_train_on_two_channels(
    workdir: pathlib.Path, datasets: tuple[pathlib.Path, pathlib.Path]
) -> None:
    both = ",".join(str(d) for d in datasets)
    argv = train_argv(workdir, both, "ckpt", "--test", both, epochs=2)
    assert main(argv) == EXIT_OK
    history = read_history_csv(workdir / "ckpt" / "metrics.csv")
    assert {r.channel for r in history} == {"diffuser", "mmf"}
    assert {r.epoch for r in history} == {1, 2}
    names = sorted(p.name for p in (workdir / "ckpt").glob("*.ckpt"))
    assert names == ["epoch-0001.ckpt", "epoch-0002.ckpt", "final.ckpt"]


def test_deterministic_training_repeats_the_csv(
    workdir: pathlib.Path, datasets: tuple[pathlib.Path, pathlib.Path]
) -> None:
    d = str(datasets[0])
    for run in ("one", "two"):
        argv = train_argv(workdir, d, run, "--test", d, "--deterministic", "--seed", "3")
        assert main(argv) == EXIT_OK
    one = (workdir / "one" / "metrics.csv").read_bytes()
    assert one == (workdir / "two" / "metrics.csv").read_bytes()


def test_train_rejects_mixed_sizes(
    workdir: pathlib.Path, datasets: tuple[pathlib.Path, pathlib.Path]
) -> None:
    assert gen(workdir / "big", "mmf", n=64) == EXIT_OK
    mixed = f"{datasets[0]},{workdir / 'big'}"
    assert main(train_argv(workdir, mixed, "ckpt")) == EXIT_RUNTIME


def test_eval_predict_plot(
    workdir: pathlib.Path, datasets: tuple[pathlib.Path, pathlib.Path]
) -> None:
    diffuser, _ = datasets
    assert main(train_argv(workdir, str(diffuser), "ckpt", "--test", str(diffuser))) == EXIT_OK
    ckpt = str(workdir / "ckpt" / "final.ckpt")

    csv = workdir / "e.csv"
    assert main(["eval", "--ckpt", ckpt, "--data", str(diffuser), "--csv", str(csv)]) == EXIT_OK
    lines = csv.read_text().splitlines()
    assert len(lines) == 1 + 3 + 1
    assert lines[-1].startswith("mean,,diffuser,")

    out = workdir / "recon.pgm"
    pair = str(diffuser / "pair-000001.bin")
    assert main(["predict", "--ckpt", ckpt, "--input", pair, "--out", str(out)]) == EXIT_OK
    blob = out.read_bytes()
    assert blob.startswith(b"P5\n32 32\n255\n")
    assert len(blob) == len(b"P5\n32 32\n255\n") + 32 * 32

    svg = workdir / "metrics.svg"
    history = str(workdir / "ckpt" / "metrics.csv")
    assert main(["plot", "--csv", history, "--out", str(svg)]) == EXIT_OK
    assert svg.read_text().count('id="mse-') == 1


def test_eval_rejects_other_sizes(
    workdir: pathlib.Path,
    datasets: tuple[pathlib.Path, pathlib.Path],
    capsys: pytest.CaptureFixture[str],
) -> None:
    diffuser, _ = datasets
    assert main(train_argv(workdir, str(diffuser), "ckpt")) == EXIT_OK
    assert gen(workdir / "big", "diffuser", n=64, count=1) == EXIT_OK
    ckpt = str(workdir / "ckpt" / "final.ckpt")
    csv = str(workdir / "e.csv")
    capsys.readouterr()
    code = main(["eval", "--ckpt", ckpt, "--data", str(workdir / "big"), "--csv", csv])
    assert code == EXIT_RUNTIME
    assert not (workdir / "e.csv").exists()
    err = capsys.readouterr().err
    assert "checkpoint architecture differs in n." in err


def test_eval_channel_tags_are_checked(
    workdir: pathlib.Path, datasets: tuple[pathlib.Path, pathlib.Path]
) -> None:
    diffuser, _ = datasets
    assert main(train_argv(workdir, str(diffuser), "ckpt")) == EXIT_OK
    ckpt = str(workdir / "ckpt" / "final.ckpt")
    argv = ["eval", "--ckpt", ckpt, "--data", str(diffuser), "--csv", str(workdir / "e.csv")]
    assert main([*argv, "--channel", "laser"]) == EXIT_USAGE
    assert not (workdir / "e.csv").exists()
    assert main([*argv, "--channel", "rotated"]) == EXIT_OK
    assert (workdir / "e.csv").read_text().splitlines()[-1].startswith("mean,,rotated,")


def test_missing_checkpoint(
    workdir: pathlib.Path, datasets: tuple[pathlib.Path, pathlib.Path]
) -> None:
    ckpt = str(workdir / "nope.ckpt")
    out = str(workdir / "x.pgm")
    pair = str(datasets[0] / "pair-000000.bin")
    assert main(["predict", "--ckpt", ckpt, "--input", pair, "--out", out]) == EXIT_RUNTIME


### experiment


def test_experiment_lists_missing_keys(
    workdir: pathlib.Path, capsys: pytest.CaptureFixture[str]
) -> None:
    recipe = workdir / "recipe.toml"
    recipe.write_text('run_dir = "run"\nn = 32\n')
    assert main(["experiment", "--kind", "hybrid", "--config", str(recipe)]) == EXIT_USAGE
    assert "missing config keys: train" in capsys.readouterr().err


def test_experiment_from_a_recipe_file(workdir: pathlib.Path) -> None:
    recipe = workdir / "recipe.toml"
    recipe.write_text(
        f'run_dir = "{workdir / "run"}"\n'
        "n = 32\n"
        "train_count = 4\n"
        "test_count = 2\n"
        "model.depth = 2\n"
        "model.base_filters = 2\n"
        'mmf.kind = "mmf"\n'
        "mmf.mmf.modes = 64\n"
        "train.epochs = 2\n"
        "train.batch_size = 2\n"
    )
    assert main(["experiment", "--kind", "cross_control", "--config", str(recipe)]) == EXIT_OK
    report = (workdir / "run" / "cross_control" / "report.toml").read_text()
    for train_channel in ("diffuser", "mmf"):
        for test_channel in ("diffuser", "mmf"):
            assert f"grid.{train_channel}.{test_channel}.corr = " in report
