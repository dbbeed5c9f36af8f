"""
`descatter` command line: gen, train, eval, predict, plot, experiment.

Exit codes: 0 on success, 2 on usage errors and invalid configuration, 1 on any other
failure. Diagnostics go to stderr; output files are only ever replaced whole.
"""
import argparse
import logging
import pathlib
import sys
import typing as T

from devtools import pformat

from descatter.data import (
    DatasetManifest,
    SamplePair,
    build_dataset,
    load_checkpoint,
    read_checkpoint_config,
    read_dataset,
    read_pair_file,
)
from descatter.errors import ConfigError, DescatterError
from descatter.model import UNetConfig, UNetModel, build_unet
from descatter.optics import ChannelKind
from descatter.train import (
    ExperimentKind,
    ChannelTag,
    ExperimentRecipe,
    TrainConfig,
    blend_datasets,
    evaluate,
    plot_history,
    read_history_csv,
    run_experiment,
    train,
    write_evaluation_csv,
    write_history_csv,
    write_pgm,
)
from descatter.utils import resolve_path

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class UsageError(DescatterError):
    """invalid flags or configuration, reported with exit code 2"""


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def path_list(text: str) -> list[pathlib.Path]:
    return [resolve_path(p) for p in text.split(",") if p]


def _parsed(fn: T.Callable[[], T.Any]) -> T.Any:
    """config built from flags or files: ConfigError becomes a usage error"""
    try:
        return fn()
    except ConfigError as e:
        raise UsageError(e.message, extensions=e.extensions, original_error=e) from e


### subcommands


def cmd_gen(args: argparse.Namespace) -> int:
    manifest: DatasetManifest = _parsed(
        lambda: DatasetManifest.parse(
            {
                "n": args.n,
                "count": args.count,
                "channel": args.channel,
                "channel_config": {
                    "kind": args.channel,
                    "seed": args.medium_seed,
                    "free": {"blur_sigma_px": args.blur},
                    "diffuser": {
                        "corr_len_px": args.corr_len,
                        "z": args.z,
                        "rotation_deg": args.rotation_deg,
                    },
                    "mmf": {"modes": args.modes},
                },
                "master_seed": args.seed,
                "source": args.source,
                "index_offset": args.offset,
                "rotation_step_deg": args.rotation_step_deg,
            }
        )
    )
    out = resolve_path(args.out)
    written = build_dataset(manifest, out, workers=args.workers)
    print(f"wrote {written.count} {written.channel.value} pairs to {out}")
    return EXIT_OK


def _load_sets(dirs: list[pathlib.Path]) -> list[tuple[str, list[SamplePair]]]:
    out = []
    for d in dirs:
        pairs, manifest = read_dataset(d)
        out.append((manifest.channel.value, pairs))
    return out


def cmd_train(args: argparse.Namespace) -> int:
    data_sets = _load_sets(args.data)
    if len(data_sets) > 2:
        raise UsageError("--data takes one or two directories.", extensions={"data": args.data})
    pairs = data_sets[0][1]
    if len(data_sets) == 2:
        pairs = blend_datasets(pairs, data_sets[1][1], args.seed)
    if not pairs:
        raise ConfigError("The training data is empty.")

    test_sets: dict[str, list[SamplePair]] = {}
    for channel, test_pairs in _load_sets(args.test or []):
        if channel in test_sets:
            raise UsageError(
                f"Two --test directories hold {channel} pairs.", extensions={"channel": channel}
            )
        test_sets[channel] = test_pairs

    n = pairs[0].n
    model_cfg: UNetConfig = _parsed(
        lambda: UNetConfig.parse({"n": n, "depth": args.depth, "base_filters": args.base_filters})
    )
    cfg: TrainConfig = _parsed(
        lambda: TrainConfig.parse(
            {
                "epochs": args.epochs,
                "batch_size": args.batch_size,
                "lr": args.lr,
                "seed": args.seed,
                "deterministic": args.deterministic,
                "max_steps": args.max_steps,
                "workers": args.workers,
            }
        )
    )
    ckpt_dir = resolve_path(args.ckpt)
    model = build_unet(model_cfg, args.seed)
    result = train(model, pairs, test_sets, cfg, checkpoint_dir=ckpt_dir)
    csv_path = resolve_path(args.csv) if args.csv else ckpt_dir / "metrics.csv"
    write_history_csv(result.history, csv_path)
    print(f"trained {result.steps} steps, checkpoints in {ckpt_dir}, metrics in {csv_path}")
    return EXIT_OK


def _model_for(ckpt: pathlib.Path, n: int | None) -> UNetModel:
    """the checkpoint's model, which must reconstruct n x n images when n is given"""
    if n is None:
        return load_checkpoint(ckpt)
    expected = read_checkpoint_config(ckpt).model_copy(update={"n": n})
    return load_checkpoint(ckpt, expected)


def cmd_eval(args: argparse.Namespace) -> int:
    pairs, manifest = read_dataset(resolve_path(args.data))
    model = _model_for(resolve_path(args.ckpt), pairs[0].n if pairs else None)
    channel = args.channel or manifest.channel.value
    result = evaluate(model, pairs, channel)
    write_evaluation_csv(result.samples, result.mean, resolve_path(args.csv))
    print(f"{channel}: mse={result.mean.mse:.6g} corr={result.mean.corr:.4f}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    _, speckle = read_pair_file(resolve_path(args.input))
    model = _model_for(resolve_path(args.ckpt), speckle.shape[0])
    write_pgm(resolve_path(args.out), model.predict(speckle[None])[0])
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    plot_history(read_history_csv(resolve_path(args.csv)), resolve_path(args.out))
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    recipe: ExperimentRecipe = _parsed(
        lambda: ExperimentRecipe.from_file(resolve_path(args.config))
    )
    report = run_experiment(ExperimentKind(args.kind), recipe)
    print(f"{report.kind.value}: report in {recipe.root / report.kind.value / 'report.toml'}")
    return EXIT_OK


### parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="descatter",
        description="Simulate scattering channels and train a U-net to undo them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="generate a speckle/object dataset")
    gen.add_argument("--channel", choices=[k.value for k in ChannelKind], required=True)
    gen.add_argument("--n", type=positive_int, default=64)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0, help="master seed of the sample streams")
    gen.add_argument("--medium-seed", type=int, default=0, help="seed of the diffuser or fiber")
    gen.add_argument(
        "--source", default="glyphs", help="glyphs | glyphs:letters | idx:PATH[,LABELS]"
    )
    gen.add_argument("--offset", type=int, default=0, help="index of the first source sample")
    gen.add_argument("--out", required=True)
    gen.add_argument("--rotation-deg", type=float, default=0.0)
    gen.add_argument("--rotation-step-deg", type=float, default=0.0)
    gen.add_argument("--modes", type=positive_int, default=256)
    gen.add_argument("--corr-len", type=float, default=4.0)
    gen.add_argument("--z", type=float, default=0.02)
    gen.add_argument("--blur", type=float, default=0.0)
    gen.add_argument("--workers", type=positive_int, default=1)
    gen.set_defaults(handler=cmd_gen)

    tr = sub.add_parser("train", parents=[common], help="train a U-net on one or two datasets")
    tr.add_argument("--data", type=path_list, required=True, help="DIR[,DIR2]")
    tr.add_argument("--test", type=path_list, help="DIR[,DIR2]")
    tr.add_argument("--epochs", type=positive_int, required=True)
    tr.add_argument("--lr", type=float, default=1e-3)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--ckpt", required=True, help="checkpoint directory")
    tr.add_argument("--csv", help="metrics history (default: <ckpt>/metrics.csv)")
    tr.add_argument("--base-filters", type=positive_int, default=16)
    tr.add_argument("--depth", type=positive_int, default=5)
    tr.add_argument("--batch-size", type=positive_int, default=4)
    tr.add_argument("--max-steps", type=int)
    tr.add_argument("--workers", type=positive_int, default=1)
    tr.add_argument("--deterministic", action="store_true")
    tr.set_defaults(handler=cmd_train)

    ev = sub.add_parser("eval", parents=[common], help="score a checkpoint on a dataset")
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--csv", required=True)
    ev.add_argument(
        "--channel",
        choices=T.get_args(ChannelTag),
        help="tag for the rows (default: the dataset's channel)",
    )
    ev.set_defaults(handler=cmd_eval)

    pr = sub.add_parser("predict", parents=[common], help="reconstruct one pair's speckle")
    pr.add_argument("--ckpt", required=True)
    pr.add_argument("--input", required=True, help="pair file")
    pr.add_argument("--out", required=True, help="P5 graymap")
    pr.set_defaults(handler=cmd_predict)

    pl = sub.add_parser("plot", parents=[common], help="draw a metrics history as SVG")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(handler=cmd_plot)

    ex = sub.add_parser("experiment", parents=[common], help="run one of the experiments")
    ex.add_argument("--kind", choices=[k.value for k in ExperimentKind], required=True)
    ex.add_argument("--config", required=True, help="TOML recipe")
    ex.set_defaults(handler=cmd_experiment)
    return parser


def report_error(e: DescatterError) -> None:
    print(f"error: {e.message}", file=sys.stderr)
    if missing := e.extensions.get("missing"):
        print(f"missing config keys: {', '.join(missing)}", file=sys.stderr)
    if e.extensions:
        print(pformat(e.extensions, highlight=False), file=sys.stderr)


def main(argv: T.Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return int(args.handler(args))
    except UsageError as e:
        report_error(e)
        return EXIT_USAGE
    except DescatterError as e:
        report_error(e)
        return EXIT_RUNTIME


__all__ = ["main", "build_parser", "positive_int", "EXIT_OK", "EXIT_RUNTIME", "EXIT_USAGE"]
