import pathlib

from descatter import (
    DatasetManifest,
    TrainConfig,
    UNetConfig,
    blend_datasets,
    build_unet,
    evaluate,
    generate_dataset,
    train,
)
from descatter.train import plot_history, write_history_csv


def manifest(kind: str, count: int, offset: int = 0) -> DatasetManifest:
    return DatasetManifest.parse(
        {
            "n": 64,
            "count": count,
            "channel": kind,
            "channel_config": {"kind": kind, "seed": 1},
            "master_seed": 0,
            "index_offset": offset,
        }
    )


diffuser = generate_dataset(manifest("diffuser", 256), workers=4)
mmf = generate_dataset(manifest("mmf", 256), workers=4)
tests = {
    "diffuser": generate_dataset(manifest("diffuser", 10, offset=256)),
    "mmf": generate_dataset(manifest("mmf", 10, offset=256)),
}

model = build_unet(UNetConfig(n=64), seed=0)
result = train(
    model,
    blend_datasets(diffuser, mmf, seed=0),
    tests,
    TrainConfig(epochs=20, workers=4),
    checkpoint_dir=pathlib.Path("run/checkpoints"),
)
write_history_csv(result.history, pathlib.Path("run/metrics.csv"))
plot_history(result.history, pathlib.Path("run/metrics.svg"))

for channel, pairs in tests.items():
    final = evaluate(result.model, pairs, channel)
    print(channel, final.mean.mse, final.mean.corr)
