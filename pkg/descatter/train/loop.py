"""
Training on a blended pair set and per-channel evaluation.
"""
import logging
import math
import pathlib
import typing as T
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import expit

from descatter.autodiff import Adam, Tensor, bce_with_logits
from descatter.data import SamplePair, derive_rng, save_checkpoint
from descatter.errors import ConfigError, DegenerateCorrelationWarning, ShapeError, TrainingError
from descatter.model import UNetModel
from descatter.utils import timed
from .config import MetricsRecord, Split, TrainConfig
from .metrics import bce, corr_flagged, mse
from .snapshots import write_snapshots

logger = logging.getLogger(__name__)

EVAL_BATCH = 16


class Reconstructor(T.Protocol):
    def predict(self, speckles: npt.ArrayLike) -> npt.NDArray[np.floating[T.Any]]: ...


@dataclass
class Evaluation:
    samples: list[MetricsRecord]
    mean: MetricsRecord

    @property
    def degenerate_count(self) -> int:
        return sum(r.degenerate for r in self.samples)


@dataclass
class TrainResult:
    model: UNetModel
    history: list[MetricsRecord]
    checkpoints: list[pathlib.Path] = field(default_factory=list)
    steps: int = 0


def blend_datasets(
    d1: T.Sequence[SamplePair], d2: T.Sequence[SamplePair], seed: int
) -> list[SamplePair]:
    """concatenate, then one seeded uniform shuffle; pairs travel intact"""
    merged = [*d1, *d2]
    sizes = sorted({p.n for p in merged})
    if len(sizes) > 1:
        raise ShapeError("Blended datasets must share one image size.", extensions={"sizes": sizes})
    order = np.random.default_rng(seed).permutation(len(merged))
    return [merged[i] for i in order]


def _record(
    epoch: int,
    split: Split,
    channel: str,
    mse_: float,
    corr: float,
    loss: float,
    degenerate: bool,
    source_id: str | None = None,
) -> MetricsRecord:
    return MetricsRecord.parse(
        {
            "epoch": epoch,
            "split": split,
            "channel": channel,
            "mse": mse_,
            "corr": corr,
            "loss": loss,
            "degenerate": degenerate,
            "source_id": source_id,
        }
    )


def _mean_record(
    epoch: int, split: Split, channel: str, rows: list[MetricsRecord]
) -> MetricsRecord:
    return _record(
        epoch,
        split,
        channel,
        float(np.mean([r.mse for r in rows])),
        float(np.mean([r.corr for r in rows])),
        float(np.mean([r.loss for r in rows])),
        any(r.degenerate for r in rows),
    )


def score(
    recon: npt.ArrayLike,
    obj: npt.ArrayLike,
    *,
    epoch: int,
    split: Split,
    channel: str,
    source_id: str | None = None,
) -> MetricsRecord:
    c, degenerate = corr_flagged(recon, obj)
    return _record(
        epoch, split, channel, mse(recon, obj), c, bce(recon, obj), degenerate, source_id
    )


def evaluate(
    model: Reconstructor,
    pairs: T.Sequence[SamplePair],
    channel: str,
    *,
    epoch: int = 0,
    workers: int = 1,
) -> Evaluation:
    """
    Reconstruct every speckle and score it against its object. Predictions run in fixed
    batches, so the worker count does not change any number.
    """
    if not pairs:
        raise ConfigError(f"No pairs to evaluate for {channel}.", extensions={"channel": channel})
    batches = [pairs[i : i + EVAL_BATCH] for i in range(0, len(pairs), EVAL_BATCH)]

    def run(batch: T.Sequence[SamplePair]) -> npt.NDArray[np.floating[T.Any]]:
        return model.predict(np.stack([p.speckle for p in batch]))

    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(run, batches))
    else:
        outputs = [run(b) for b in batches]
    recon = np.concatenate(outputs)

    samples = [
        score(r, p.object_, epoch=epoch, split="test", channel=channel, source_id=p.source_id)
        for r, p in zip(recon, pairs)
    ]
    if degenerate := sum(s.degenerate for s in samples):
        logger.warning(
            f"{degenerate} of {len(samples)} {channel} reconstructions are constant; "
            f"their Corr is reported as 0.0 ({DegenerateCorrelationWarning.__name__})"
        )
    return Evaluation(samples=samples, mean=_mean_record(epoch, "test", channel, samples))


def _as_batch(images: list[npt.NDArray[np.float32]], dtype: np.dtype[T.Any]) -> Tensor:
    return Tensor(np.stack(images)[:, None, :, :].astype(dtype))


def train(
    model: UNetModel,
    blended: T.Sequence[SamplePair],
    test_sets: T.Mapping[str, T.Sequence[SamplePair]],
    cfg: TrainConfig,
    *,
    checkpoint_dir: pathlib.Path | None = None,
    snapshot_dir: pathlib.Path | None = None,
) -> TrainResult:
    """
    Mini-batch Adam on BCE, taken from the head's logits. Epoch k visits the pairs in
    the order drawn from derive_rng(cfg.seed, k). Train metrics come from the predictions
    made before each update, test metrics from a full evaluation after the epoch.
    """
    if not blended:
        raise ConfigError("Training needs at least one pair.")
    n = model.config.n
    if any(p.n != n for p in blended):
        raise ShapeError(
            f"Training pairs must be {n}x{n} for this model.",
            extensions={"n": n, "sizes": sorted({p.n for p in blended})},
        )

    optimizer = Adam(model.params, cfg.adam_hyper())
    result = TrainResult(model=model, history=[])
    if snapshot_dir is not None and 0 in cfg.snapshot_epochs:
        write_snapshots(model, test_sets, 0, snapshot_dir, cfg.snapshot_count)

    for epoch in range(1, cfg.epochs + 1):
        order = derive_rng(cfg.seed, epoch).permutation(len(blended))
        per_channel: dict[str, list[MetricsRecord]] = defaultdict(list)
        losses: list[float] = []
        with timed(f"EPOCH {epoch}", logger):
            for b, start in enumerate(range(0, len(order), cfg.batch_size)):
                if cfg.max_steps is not None and result.steps >= cfg.max_steps:
                    break
                batch = [blended[i] for i in order[start : start + cfg.batch_size]]
                x = _as_batch([p.speckle for p in batch], model.dtype)
                y = _as_batch([p.object_ for p in batch], model.dtype)

                logits = model.logits(x)
                loss = bce_with_logits(logits, y)
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingError(
                        f"Loss became {value} at epoch {epoch}, batch {b}.",
                        extensions={"epoch": epoch, "batch": b, "loss": value},
                    )
                loss.backward()
                optimizer.step()
                result.steps += 1
                losses.append(value)

                for p, r in zip(batch, expit(logits.data[:, 0])):
                    per_channel[p.channel_tag].append(
                        score(r, p.object_, epoch=epoch, split="train", channel=p.channel_tag)
                    )

            for channel in sorted(per_channel):
                result.history.append(_mean_record(epoch, "train", channel, per_channel[channel]))
            for channel, pairs in test_sets.items():
                if pairs:
                    result.history.append(
                        evaluate(model, pairs, channel, epoch=epoch, workers=cfg.eval_workers).mean
                    )
        if losses:
            logger.info(f"[EPOCH {epoch}] loss={np.mean(losses):.4f} steps={result.steps}")

        if checkpoint_dir is not None and epoch % cfg.checkpoint_every == 0:
            path = checkpoint_dir / f"epoch-{epoch:04d}.ckpt"
            save_checkpoint(model, path)
            result.checkpoints.append(path)
        if snapshot_dir is not None and epoch in cfg.snapshot_epochs:
            write_snapshots(model, test_sets, epoch, snapshot_dir, cfg.snapshot_count)

    if checkpoint_dir is not None:
        path = checkpoint_dir / "final.ckpt"
        save_checkpoint(model, path)
        result.checkpoints.append(path)
    return result


__all__ = [
    "Reconstructor",
    "Evaluation",
    "TrainResult",
    "blend_datasets",
    "score",
    "evaluate",
    "train",
]
