import io
import pathlib
import typing as T
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from descatter.errors import ConfigError  # noqa: E402
from descatter.utils import atomic_write_bytes  # noqa: E402
from .config import MetricsRecord  # noqa: E402

# a fixed salt and no date keep the SVG byte-identical across runs
SVG_HASH_SALT = "descatter"
MSE_FLOOR = 1e-12


def _series(records: T.Sequence[MetricsRecord]) -> dict[str, list[MetricsRecord]]:
    """test curves per channel; histories without test rows fall back to train rows"""
    split = "test" if any(r.split == "test" for r in records) else "train"
    out: dict[str, list[MetricsRecord]] = defaultdict(list)
    for r in records:
        if r.split == split:
            out[r.channel].append(r)
    return {channel: sorted(rows, key=lambda r: r.epoch) for channel, rows in sorted(out.items())}


def render_history_svg(records: T.Sequence[MetricsRecord]) -> bytes:
    """two panels, log10(MSE) and Corr by epoch; series ids `mse-<channel>`, `corr-<channel>`"""
    if not records:
        raise ConfigError("Nothing to plot: the history is empty.")
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig, ax = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
        try:
            for channel, rows in _series(records).items():
                epochs = [r.epoch for r in rows]
                log_mse = np.log10(np.maximum([r.mse for r in rows], MSE_FLOOR))
                (line,) = ax[0].plot(epochs, log_mse, marker="o", markersize=3, label=channel)
                line.set_gid(f"mse-{channel}")
                (line,) = ax[1].plot(
                    epochs, [r.corr for r in rows], marker="o", markersize=3, label=channel
                )
                line.set_gid(f"corr-{channel}")

            ax[0].set_ylabel("log10(MSE)")
            ax[0].set_title("reconstruction error")
            ax[0].legend()
            ax[1].set_ylabel("Corr")
            ax[1].set_xlabel("epoch")
            ax[1].set_title("correlation with the object")
            ax[1].legend()
            fig.tight_layout()

            buffer = io.BytesIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return buffer.getvalue()


def plot_history(records: T.Sequence[MetricsRecord], path: pathlib.Path) -> None:
    atomic_write_bytes(path, render_history_svg(records))


__all__ = ["plot_history", "render_history_svg"]
