import pathlib
import typing as T

import numpy as np
import pytest

from descatter.data import DatasetManifest, SamplePair, generate_dataset
from descatter.model import UNetConfig
from descatter.optics import ChannelConfig, ChannelKind


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(42)


@pytest.fixture
def tiny_unet() -> UNetConfig:
    return UNetConfig(n=16, depth=2, base_filters=2)


def small_manifest(kind: str, count: int = 4, n: int = 32, **extra: object) -> DatasetManifest:
    return DatasetManifest.parse(
        {
            "n": n,
            "count": count,
            "channel": kind,
            "channel_config": {"kind": kind, "seed": 3, "mmf": {"modes": 64}},
            "master_seed": 7,
            **extra,
        }
    )


@pytest.fixture
def diffuser_pairs() -> list[SamplePair]:
    return generate_dataset(small_manifest(ChannelKind.diffuser.value))


@pytest.fixture
def mmf_pairs() -> list[SamplePair]:
    return generate_dataset(small_manifest(ChannelKind.mmf.value))


@pytest.fixture
def diffuser_config() -> ChannelConfig:
    return ChannelConfig.parse({"kind": "diffuser", "seed": 11})


@pytest.fixture
def workdir(tmp_path: pathlib.Path, monkeypatch: pytest.MonkeyPatch) -> pathlib.Path:
    monkeypatch.delenv("DESCATTER_DATA", raising=False)
    return tmp_path


@pytest.fixture
def make_manifest() -> T.Callable[..., DatasetManifest]:
    return small_manifest
