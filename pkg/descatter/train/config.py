import typing as T

from pydantic import Field

from descatter.autodiff import AdamHyper
from descatter.config import Config
from descatter.optics import UINT64_MAX

ChannelTag = T.Literal["diffuser", "mmf", "letters", "rotated", "free"]
Split = T.Literal["train", "test"]


class TrainConfig(Config):
    epochs: int = Field(ge=1)
    batch_size: int = Field(default=4, ge=1)
    lr: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, gt=0, lt=1)
    beta2: float = Field(default=0.999, gt=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    checkpoint_every: int = Field(default=1, ge=1)
    deterministic: bool = False
    # caps optimizer steps across all epochs; 0 runs no batches at all
    max_steps: int | None = Field(default=None, ge=0)
    workers: int = Field(default=1, ge=1)
    snapshot_epochs: list[int] = []
    snapshot_count: int = Field(default=3, ge=1)

    def adam_hyper(self) -> AdamHyper:
        return AdamHyper(lr=self.lr, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon)

    @property
    def eval_workers(self) -> int:
        return 1 if self.deterministic else self.workers


class MetricsRecord(Config):
    epoch: int = Field(ge=0)
    split: Split
    channel: ChannelTag
    mse: float = Field(ge=0)
    corr: float = Field(ge=-1, le=1)
    loss: float = Field(ge=0)
    degenerate: bool = False
    source_id: str | None = None


__all__ = ["TrainConfig", "MetricsRecord", "ChannelTag", "Split"]
