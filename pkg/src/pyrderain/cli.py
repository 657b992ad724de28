"""Batch command-line interface: synth, train, derain, eval, inspect.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
Every command echoes its effective configuration for reproducibility, and no
command mutates its inputs.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .checkpoint import load_checkpoint
from .config import RunConfig
from .data import (
    PairedCorpus,
    build_corpus,
    load_image,
    save_image,
    write_scene_set,
)
from .errors import ConfigError, DataError, NumericError, ShapeError
from .losses import psnr, ssim_value
from .model import count_parameters, net_forward
from .pyramid import laplacian_decompose
from .train import train as run_training


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems map to exit code 1
        raise ConfigError(message)


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="seed for all randomness")
    parser.add_argument("--precision", choices=("f32", "f64"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pyrderain", description=__doc__)
    _common_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="build a paired clean/rainy corpus")
    _common_flags(p)
    p.add_argument("clean_dir", nargs="?", default=None)
    p.add_argument("out_dir", nargs="?", default=None)
    p.add_argument("--rain-density", type=float, default=None)
    p.add_argument("--rain-angle", type=float, default=None)
    p.add_argument("--rain-angle-jitter", type=float, default=None)
    p.add_argument("--rain-length", type=float, default=None)
    p.add_argument("--rain-length-jitter", type=float, default=None)
    p.add_argument("--rain-width", type=float, default=None)
    p.add_argument("--rain-intensity", type=float, default=None)
    p.add_argument("--rain-blur", type=float, default=None)
    p.add_argument(
        "--demo-scenes",
        type=int,
        default=0,
        metavar="N",
        help="generate N procedural clean scenes into clean_dir first if it has no PNGs",
    )
    p.add_argument("--demo-size", type=int, default=128, help="side length of demo scenes")

    p = sub.add_parser("train", help="train a model on a paired corpus")
    _common_flags(p)
    p.add_argument("corpus", nargs="?", default=None)
    p.add_argument("checkpoint", nargs="?", default=None, help="output checkpoint path")
    p.add_argument("--loss-csv", default=None, help="per-step loss log (default <checkpoint>.loss.csv)")
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--patch-size", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patches-per-epoch", type=int, default=None)
    p.add_argument("--checkpoint-every", type=int, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--recursions", type=int, default=None)
    p.add_argument("--kernel-counts", default=None, help="comma-separated, finest to coarsest")
    p.add_argument("--feature-kernel", type=int, default=None)
    p.add_argument("--output-kernel", type=int, default=None)
    p.add_argument("--lrelu-slope", type=float, default=None)

    p = sub.add_parser("derain", help="run a checkpoint over images")
    _common_flags(p)
    p.add_argument("checkpoint", nargs="?", default=None)
    p.add_argument("input", nargs="?", default=None, help="PNG file or directory of PNGs")
    p.add_argument("out_dir", nargs="?", default=None)

    p = sub.add_parser("eval", help="PSNR/SSIM between paired directories")
    _common_flags(p)
    p.add_argument("dir_a")
    p.add_argument("dir_b")

    p = sub.add_parser("inspect", help="pyramid levels, histograms, and statistics")
    _common_flags(p)
    p.add_argument("image", nargs="?", default=None)
    p.add_argument("out_dir", nargs="?", default=None)
    p.add_argument("--levels", type=int, default=None)
    return parser


def _load_config(args, flag_keys: dict[str, str]) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    flags = {}
    for attr, key in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            flags[key] = value
    for attr in ("seed", "precision"):
        value = getattr(args, attr, None)
        if value is not None:
            flags[attr] = value
    cfg.update(flags)
    return cfg


def _echo(cfg: RunConfig) -> None:
    for line in cfg.echo_lines():
        print(line)


def _resolve_path(value, cfg: RunConfig, key: str, what: str) -> str:
    resolved = value if value is not None else cfg.get(key)
    if resolved is None:
        raise ConfigError(f"missing {what}: pass it as an argument or set {key}= in the config")
    return resolved


def cmd_synth(args) -> int:
    cfg = _load_config(
        args,
        {
            "rain_density": "rain_density",
            "rain_angle": "rain_angle",
            "rain_angle_jitter": "rain_angle_jitter",
            "rain_length": "rain_length",
            "rain_length_jitter": "rain_length_jitter",
            "rain_width": "rain_width",
            "rain_intensity": "rain_intensity",
            "rain_blur": "rain_blur",
        },
    )
    _echo(cfg)
    clean_dir = Path(_resolve_path(args.clean_dir, cfg, "clean_dir", "clean image directory"))
    out_dir = Path(_resolve_path(args.out_dir, cfg, "out_dir", "output directory"))
    if args.demo_scenes > 0 and not any(clean_dir.glob("*.png")):
        write_scene_set(clean_dir, args.demo_scenes, args.demo_size, args.demo_size, seed=cfg["seed"])
        print(f"generated {args.demo_scenes} demo scenes in {clean_dir}")
    corpus = build_corpus(clean_dir, out_dir, cfg.rain_params())
    gains = []
    for i in range(len(corpus)):
        clean, rainy = corpus.pair(i)
        gains.append(psnr(Tensor(rainy[np.newaxis]), Tensor(clean[np.newaxis])))
    print(f"pairs={len(corpus)} mean_rainy_psnr={np.mean(gains):.2f}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(
        args,
        {
            "learning_rate": "learning_rate",
            "batch_size": "batch_size",
            "patch_size": "patch_size",
            "epochs": "epochs",
            "patches_per_epoch": "patches_per_epoch",
            "checkpoint_every": "checkpoint_every",
            "levels": "levels",
            "recursions": "recursions",
            "kernel_counts": "kernel_counts",
            "feature_kernel": "feature_kernel",
            "output_kernel": "output_kernel",
            "lrelu_slope": "lrelu_slope",
            "loss_csv": "loss_csv",
        },
    )
    _echo(cfg)
    corpus_dir = _resolve_path(args.corpus, cfg, "corpus", "corpus directory")
    checkpoint_path = _resolve_path(args.checkpoint, cfg, "checkpoint", "checkpoint output path")
    loss_csv = cfg.get("loss_csv") or f"{checkpoint_path}.loss.csv"
    model_cfg = cfg.model_config()
    train_cfg = cfg.train_config()
    print(f"parameters: {count_parameters(model_cfg)}")
    corpus = PairedCorpus.from_dir(corpus_dir)
    result = run_training(
        corpus,
        train_cfg,
        model_cfg,
        precision=cfg["precision"],
        checkpoint_path=checkpoint_path,
        loss_csv_path=loss_csv,
        log=print,
    )
    final = result.rows[-1].total if result.rows else float("nan")
    print(f"steps={len(result.rows)} final_loss={final:.6f} checkpoint={checkpoint_path}")
    return 0


def _input_images(input_path: Path) -> list[Path]:
    if input_path.is_dir():
        images = sorted(input_path.glob("*.png"))
        if not images:
            raise DataError(f"{input_path}: no PNG images found")
        return images
    if input_path.exists():
        return [input_path]
    raise DataError(f"{input_path}: no such file or directory")


def cmd_derain(args) -> int:
    cfg = _load_config(args, {})
    _echo(cfg)
    checkpoint_path = _resolve_path(args.checkpoint, cfg, "checkpoint", "checkpoint path")
    input_path = Path(_resolve_path(args.input, cfg, "input", "input file or directory"))
    out_dir = Path(_resolve_path(args.out_dir, cfg, "out_dir", "output directory"))
    params, _ = load_checkpoint(checkpoint_path, precision=cfg["precision"])
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for path in _input_images(input_path):
        try:
            image = load_image(path)
            g_out, _ = net_forward(Tensor(image.data.astype(params.dtype)), params)
            save_image(Tensor(g_out[0].data.astype(np.float32)), out_dir / path.name)
            print(f"derained {path.name}")
        except (DataError, ShapeError) as exc:
            failures += 1
            print(f"error: {path.name}: {exc}", file=sys.stderr)
    return 2 if failures else 0


def _paired_pngs(dir_a: Path, dir_b: Path) -> tuple[list[tuple[Path, Path]], list[str]]:
    a = {p.stem: p for p in sorted(dir_a.glob("*.png"))}
    b = {p.stem: p for p in sorted(dir_b.glob("*.png"))}
    unpaired = sorted(set(a) ^ set(b))
    pairs = [(a[stem], b[stem]) for stem in sorted(set(a) & set(b))]
    return pairs, unpaired


def _format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def cmd_eval(args) -> int:
    cfg = _load_config(args, {})
    _echo(cfg)
    dir_a, dir_b = Path(args.dir_a), Path(args.dir_b)
    for d in (dir_a, dir_b):
        if not d.is_dir():
            raise DataError(f"{d}: no such directory")
    pairs, unpaired = _paired_pngs(dir_a, dir_b)
    if not pairs:
        raise DataError(f"no paired PNGs between {dir_a} and {dir_b}")
    print("name,psnr,ssim")
    psnrs, ssims = [], []
    for path_a, path_b in pairs:
        img_a, img_b = load_image(path_a), load_image(path_b)
        p = psnr(img_a, img_b)
        s = ssim_value(img_a, img_b)
        psnrs.append(p)
        ssims.append(s)
        print(f"{path_a.stem},{_format_db(p)},{s:.2f}")
    print(f"mean,{_format_db(float(np.mean(psnrs)))},{np.mean(ssims):.2f}")
    for stem in unpaired:
        print(f"error: unpaired image {stem}", file=sys.stderr)
    return 2 if unpaired else 0


def _excess_kurtosis(values: np.ndarray) -> float:
    centered = values.astype(np.float64).reshape(-1)
    centered = centered - centered.mean()
    m2 = np.mean(centered**2)
    if m2 == 0:
        return 0.0
    return float(np.mean(centered**4) / (m2 * m2) - 3.0)


def _stats_row(name: str, values: np.ndarray, offset: float, scale: float) -> str:
    v = values.astype(np.float64)
    return (
        f"{name},{v.min():.9g},{v.max():.9g},{v.mean():.9g},{v.std():.9g},"
        f"{_excess_kurtosis(v):.9g},{offset:.9g},{scale:.9g}"
    )


def cmd_inspect(args) -> int:
    cfg = _load_config(args, {"levels": "levels"})
    _echo(cfg)
    image_path = Path(_resolve_path(args.image, cfg, "input", "input image"))
    out_dir = Path(_resolve_path(args.out_dir, cfg, "out_dir", "output directory"))
    levels = cfg["levels"]
    image = load_image(image_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    lap, gauss = laplacian_decompose(image, levels)
    stats = ["name,min,max,mean,std,excess_kurtosis,view_offset,view_scale"]
    stats.append(_stats_row("image", image.data, 0.0, 1.0))
    for n, level in enumerate(gauss, start=1):
        save_image(level, out_dir / f"gaussian_{n}.png")
    for n, level in enumerate(lap, start=1):
        raw = level.data[0]
        lo, hi = float(raw.min()), float(raw.max())
        scale = hi - lo if hi > lo else 1.0
        save_image((raw - lo) / scale, out_dir / f"laplacian_{n}.png")
        stats.append(_stats_row(f"laplacian_{n}", raw, lo, scale))
        # 256 bins symmetric about zero so a constant level lands in the zero bin
        bound = max(abs(lo), abs(hi), 1e-12)
        counts, edges = np.histogram(raw.reshape(-1), bins=256, range=(-bound, bound))
        with open(out_dir / f"hist_laplacian_{n}.csv", "w", encoding="utf-8") as fh:
            fh.write("bin_left,bin_right,count\n")
            for k in range(256):
                fh.write(f"{edges[k]:.9g},{edges[k + 1]:.9g},{counts[k]}\n")
    (out_dir / "stats.csv").write_text("\n".join(stats) + "\n", encoding="utf-8")
    print(f"wrote {levels} laplacian + {levels} gaussian levels to {out_dir}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "derain": cmd_derain,
    "eval": cmd_eval,
    "inspect": cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
