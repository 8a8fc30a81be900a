"""Command-line entry point: train, stylize, portrait, segment, gradcheck.

Values come from flags first, then an optional JSON config file, then the
built-in defaults. Exit codes are stable: 0 success, 1 verification failure,
2 usage/config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import gradcheck as gc
from .attention import FusionWeights
from .autodiff import ShapeError
from .images import ImageDecodeError, ImageFormatError, read_image, write_image
from .masks import MaskError, load_mask, trivial_segment
from .network import CheckpointError, load_checkpoint, save_checkpoint
from .pipeline import PassPreset, composite, feather, stylize
from .training import ConfigError, NumericError, TrainConfig, train, write_trace_csv

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_USAGE_ERRORS = (
    ConfigError,
    CheckpointError,
    ImageFormatError,
    ImageDecodeError,
    MaskError,
    ShapeError,
    FileNotFoundError,
    IsADirectoryError,
    ValueError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="portraitstyle",
        description="Mask-aware two-pass portrait style transfer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train from scratch on image corpora")
    p.add_argument("--config", type=Path, help="JSON file with defaults for any flag")
    p.add_argument("--content-dir", type=Path)
    p.add_argument("--style-dir", type=Path)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--crop", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--content-weight", type=float)
    p.add_argument("--style-weight", type=float)
    p.add_argument("--out", type=Path)
    p.add_argument("--trace", type=Path)

    p = sub.add_parser("stylize", help="single style-transfer pass")
    p.add_argument("--config", type=Path)
    p.add_argument("--content", type=Path)
    p.add_argument("--style", type=Path)
    p.add_argument("--ckpt", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--w1", type=float)
    p.add_argument("--w2", type=float)

    p = sub.add_parser("portrait", help="two-pass masked portrait transfer")
    p.add_argument("--config", type=Path)
    p.add_argument("--content", type=Path)
    p.add_argument("--style", type=Path)
    p.add_argument("--mask", type=Path)
    p.add_argument("--segment", choices=["center_ellipse", "luma_threshold"])
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--ckpt", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--bg-w1", type=float)
    p.add_argument("--bg-w2", type=float)
    p.add_argument("--fg-w1", type=float)
    p.add_argument("--fg-w2", type=float)
    p.add_argument("--feather", type=int)
    p.add_argument("--debug-passes", action="store_true", default=None)

    p = sub.add_parser("segment", help="write a trivial segmentation mask")
    p.add_argument("--config", type=Path)
    p.add_argument("--input", type=Path)
    p.add_argument("--method", choices=["center_ellipse", "luma_threshold"])
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("gradcheck", help="finite-difference verification suite")
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    return parser


_DEFAULTS: dict[str, dict] = {
    "train": {
        "content_dir": None,
        "style_dir": None,
        "steps": None,
        "lr": 1e-4,
        "batch": 5,
        "crop": 16,
        "seed": 0,
        "lambda1": 1.0,
        "lambda2": 50.0,
        "content_weight": 0.0,
        "style_weight": 0.0,
        "out": Path("checkpoint.psty"),
        "trace": None,
    },
    "stylize": {
        "content": None,
        "style": None,
        "ckpt": None,
        "out": None,
        "w1": 1.0,
        "w2": 1.0,
    },
    "portrait": {
        "content": None,
        "style": None,
        "mask": None,
        "segment": None,
        "lo": 0.0,
        "hi": 1.0,
        "ckpt": None,
        "out": None,
        "bg_w1": 0.3,
        "bg_w2": 1.0,
        "fg_w1": 1.0,
        "fg_w2": 0.2,
        "feather": 0,
        "debug_passes": False,
    },
    "segment": {
        "input": None,
        "method": "center_ellipse",
        "lo": 0.0,
        "hi": 1.0,
        "out": None,
    },
    "gradcheck": {"seed": 42, "tol": gc.DEFAULT_TOL},
}

_PATH_KEYS = {"content_dir", "style_dir", "out", "trace", "content", "style", "ckpt", "mask", "input"}


def _resolve(args: argparse.Namespace, command: str) -> dict:
    """Merge CLI flags over config-file values over defaults."""
    defaults = _DEFAULTS[command]
    merged = dict(defaults)
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        for key, value in loaded.items():
            norm = key.replace("-", "_")
            if norm not in defaults:
                raise ConfigError(f"{args.config}: unknown config key {key!r}")
            if norm in _PATH_KEYS and value is not None:
                value = Path(value)
            merged[norm] = value
    for key in defaults:
        flag_value = getattr(args, key)
        if flag_value is not None:
            merged[key] = flag_value
    return merged


def _require(merged: dict, command: str, *keys: str) -> None:
    for key in keys:
        if merged[key] is None:
            flag = "--" + key.replace("_", "-")
            raise ConfigError(f"{command}: {flag} is required (flag or config file)")


def cmd_train(args: argparse.Namespace) -> int:
    opts = _resolve(args, "train")
    _require(opts, "train", "content_dir", "style_dir", "steps")
    config = TrainConfig(
        content_dir=opts["content_dir"],
        style_dir=opts["style_dir"],
        steps=opts["steps"],
        lr=opts["lr"],
        batch_size=opts["batch"],
        crop_size=opts["crop"],
        seed=opts["seed"],
        lambda1=opts["lambda1"],
        lambda2=opts["lambda2"],
        content_weight=opts["content_weight"],
        style_weight=opts["style_weight"],
    )
    ckpt, trace = train(config)
    save_checkpoint(ckpt, opts["out"])
    if opts["trace"] is not None:
        write_trace_csv(trace, opts["trace"])
    if trace:
        last = trace[-1]
        print(
            f"step {len(trace) - 1}: total {last.total:.6f} "
            f"(pixel {last.pixel_identity:.6f}, feature {last.feature_identity:.6f})"
        )
    else:
        print("no training steps requested; wrote initial checkpoint")
    print(f"checkpoint written to {opts['out']}")
    return EXIT_OK


def cmd_stylize(args: argparse.Namespace) -> int:
    opts = _resolve(args, "stylize")
    _require(opts, "stylize", "content", "style", "ckpt", "out")
    ckpt = load_checkpoint(opts["ckpt"])
    out = stylize(
        read_image(opts["content"]),
        read_image(opts["style"]),
        FusionWeights(opts["w1"], opts["w2"]),
        ckpt,
    )
    write_image(out, opts["out"])
    print(f"stylized image written to {opts['out']}")
    return EXIT_OK


def _debug_path(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}_{tag}{out.suffix}")


def cmd_portrait(args: argparse.Namespace) -> int:
    opts = _resolve(args, "portrait")
    _require(opts, "portrait", "content", "style", "ckpt", "out")
    if opts["mask"] is None and opts["segment"] is None:
        raise ConfigError("portrait: provide either --mask or --segment")
    content = read_image(opts["content"])
    style = read_image(opts["style"])
    if opts["mask"] is not None:
        mask = load_mask(opts["mask"])
    else:
        mask = trivial_segment(content, opts["segment"], lo=opts["lo"], hi=opts["hi"])
        if not mask.data.any():
            raise ConfigError(f"segmentation {opts['segment']!r} produced an empty mask")
    from .network import StyleNet

    net = StyleNet(load_checkpoint(opts["ckpt"]))
    bg = PassPreset("background", FusionWeights(opts["bg_w1"], opts["bg_w2"]))
    fg = PassPreset("portrait", FusionWeights(opts["fg_w1"], opts["fg_w2"]))
    background = stylize(content, style, bg.fusion, net)
    foreground = stylize(content, style, fg.fusion, net)
    out_path = Path(opts["out"])
    if opts["debug_passes"]:
        write_image(background, _debug_path(out_path, "bg"))
        write_image(foreground, _debug_path(out_path, "fg"))
    result = composite(background, foreground, feather(mask, opts["feather"]))
    write_image(result, out_path)
    print(f"portrait composite written to {out_path}")
    return EXIT_OK


def cmd_segment(args: argparse.Namespace) -> int:
    opts = _resolve(args, "segment")
    _require(opts, "segment", "input", "out")
    mask = trivial_segment(read_image(opts["input"]), opts["method"], lo=opts["lo"], hi=opts["hi"])
    from .images import ImageBuffer

    write_image(ImageBuffer(mask.data[:, :, None]), opts["out"])
    print(f"mask written to {opts['out']}")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    opts = _resolve(args, "gradcheck")
    results = gc.run_gradcheck(seed=opts["seed"])
    text, ok = gc.report(results, tol=opts["tol"])
    print(text)
    if not ok:
        failing = [name for name, err in results.items() if err > opts["tol"]]
        print(f"gradcheck FAILED for: {', '.join(failing)}", file=sys.stderr)
        return EXIT_VERIFY
    print(f"gradcheck passed at tol {opts['tol']:g}")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "stylize": cmd_stylize,
    "portrait": cmd_portrait,
    "segment": cmd_segment,
    "gradcheck": cmd_gradcheck,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
