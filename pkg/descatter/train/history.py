"""
Metric histories as CSV. The per-epoch history keeps the fixed header
`epoch,split,channel,mse,corr,loss`; evaluation files list one row per sample plus a
closing `mean` row.
"""
import csv
import io
import pathlib
import typing as T

from descatter.errors import ConfigError, FormatError
from descatter.utils import atomic_write_text
from .config import MetricsRecord

HISTORY_HEADER = ["epoch", "split", "channel", "mse", "corr", "loss"]
EVALUATION_HEADER = ["sample", "source_id", "channel", "mse", "corr", "loss", "degenerate"]


def _render(header: list[str], rows: T.Iterable[list[T.Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _numbers(r: MetricsRecord) -> list[str]:
    return [repr(r.mse), repr(r.corr), repr(r.loss)]


def history_csv(records: T.Iterable[MetricsRecord]) -> str:
    return _render(
        HISTORY_HEADER,
        ([r.epoch, r.split, r.channel, *_numbers(r)] for r in records),
    )


def write_history_csv(records: T.Iterable[MetricsRecord], path: pathlib.Path) -> None:
    atomic_write_text(path, history_csv(records))


def read_history_csv(path: pathlib.Path) -> list[MetricsRecord]:
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise FormatError(
            f"Could not read {path}: {e}", extensions={"path": str(path)}, original_error=e
        ) from e
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != HISTORY_HEADER:
        raise FormatError(
            f"{path} is not a metrics history (header {reader.fieldnames}).",
            extensions={"path": str(path), "offset": 0},
        )
    records = []
    for line, row in enumerate(reader, start=2):
        try:
            records.append(MetricsRecord.parse(row))
        except ConfigError as e:
            raise FormatError(
                f"{path}:{line}: {e.message}",
                extensions={"path": str(path), "line": line},
                original_error=e,
            ) from e
    return records


def evaluation_csv(samples: T.Sequence[MetricsRecord], mean: MetricsRecord) -> str:
    """per-sample `degenerate` is 0/1; the mean row counts the degenerate samples"""
    rows: list[list[T.Any]] = [
        [i, r.source_id or "", r.channel, *_numbers(r), int(r.degenerate)]
        for i, r in enumerate(samples)
    ]
    rows.append(
        [
            "mean",
            "",
            mean.channel,
            *_numbers(mean),
            sum(r.degenerate for r in samples),
        ]
    )
    return _render(EVALUATION_HEADER, rows)


def write_evaluation_csv(
    samples: T.Sequence[MetricsRecord], mean: MetricsRecord, path: pathlib.Path
) -> None:
    atomic_write_text(path, evaluation_csv(samples, mean))


__all__ = [
    "HISTORY_HEADER",
    "EVALUATION_HEADER",
    "history_csv",
    "write_history_csv",
    "read_history_csv",
    "evaluation_csv",
    "write_evaluation_csv",
]
