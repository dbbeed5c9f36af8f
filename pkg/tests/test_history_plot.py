import pathlib
import typing as T

import numpy as np
import pytest

from descatter.data import SamplePair
from descatter.errors import ConfigError, FormatError
from descatter.train import (
    MetricsRecord,
    evaluation_csv,
    plot_history,
    read_history_csv,
    write_history_csv,
)
from descatter.train.plot import render_history_svg
from descatter.train.snapshots import encode_pgm, snapshot_strip, to_uint8


def record(
    epoch: int, split: str, channel: str, mse: float = 0.1, corr: float = 0.5, **extra: T.Any
) -> MetricsRecord:
    return MetricsRecord.parse(
        {
            "epoch": epoch,
            "split": split,
            "channel": channel,
            "mse": mse,
            "corr": corr,
            "loss": 0.3,
            **extra,
        }
    )


@pytest.fixture
def history() -> list[MetricsRecord]:
    rows = []
    for epoch in (1, 2, 3):
        for channel in ("diffuser", "mmf"):
            rows.append(record(epoch, "train", channel, mse=0.1 / epoch))
            rows.append(record(epoch, "test", channel, mse=0.2 / epoch, corr=0.2 * epoch))
    return rows


### csv


def test_history_round_trip(history: list[MetricsRecord], tmp_path: pathlib.Path) -> None:
    path = tmp_path / "metrics.csv"
    write_history_csv(history, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,split,channel,mse,corr,loss"
    assert len(lines) == 1 + len(history)
    assert read_history_csv(path) == history


def test_history_header_is_checked(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "metrics.csv"
    path.write_text("epoch,mse\n1,0.5\n")
    with pytest.raises(FormatError) as e:
        read_history_csv(path)
    assert e.value.extensions["offset"] == 0


def test_history_rows_are_checked(tmp_path: pathlib.Path) -> None:
    path = tmp_path / "metrics.csv"
    header = "epoch,split,channel,mse,corr,loss\n"
    path.write_text(header + "1,test,mmf,0.1,0.5,0.2\n1,test,mmf,x,0,0\n")
    with pytest.raises(FormatError) as e:
        read_history_csv(path)
    assert e.value.extensions["line"] == 3


def test_evaluation_csv_counts_degenerate_samples() -> None:
    samples = [
        record(0, "test", "mmf", corr=0.5),
        record(0, "test", "mmf", corr=0.0, degenerate=True, source_id="digit-1/seed-9"),
    ]
    mean = record(0, "test", "mmf", corr=0.25)
    lines = evaluation_csv(samples, mean).splitlines()
    assert lines[0] == "sample,source_id,channel,mse,corr,loss,degenerate"
    assert lines[1].endswith(",0") and lines[1].startswith("0,,mmf,")
    assert lines[2].startswith("1,digit-1/seed-9,mmf,") and lines[2].endswith(",1")
    assert lines[3].startswith("mean,,mmf,") and lines[3].endswith(",1")


### svg


def test_svg_has_one_series_per_channel_and_panel(history: list[MetricsRecord]) -> None:
    svg = render_history_svg(history).decode("utf-8")
    assert svg.lstrip().startswith("<?xml")
    assert svg.count('id="mse-') == 2
    assert svg.count('id="corr-') == 2
    assert 'id="mse-diffuser"' in svg and 'id="corr-mmf"' in svg


def test_svg_falls_back_to_train_rows(history: list[MetricsRecord]) -> None:
    train_only = [r for r in history if r.split == "train"]
    svg = render_history_svg(train_only).decode("utf-8")
    assert svg.count('id="mse-') == 2


def test_svg_is_reproducible(history: list[MetricsRecord], tmp_path: pathlib.Path) -> None:
    plot_history(history, tmp_path / "a.svg")
    plot_history(history, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_svg_needs_records() -> None:
    with pytest.raises(ConfigError):
        render_history_svg([])


### graymaps


def test_pgm_header_and_pixels() -> None:
    img = np.linspace(0, 1, 12).reshape(3, 4)
    blob = encode_pgm(img)
    header = b"P5\n4 3\n255\n"
    assert blob.startswith(b"P5")
    assert blob.endswith(to_uint8(img).tobytes())
    assert len(blob) == len(header) + 12


def test_snapshot_strip_layout() -> None:
    obj = np.zeros((4, 4), np.float32)
    speckle = np.ones((4, 4), np.float32)
    pair = SamplePair(object_=obj, speckle=speckle, channel_tag="mmf", source_id="x")
    strip = snapshot_strip([pair, pair], np.full((2, 4, 4), 0.5))
    assert strip.shape == (8, 12)
    assert strip[0, 0] == 0 and strip[0, 4] == 1 and strip[7, 11] == 0.5
