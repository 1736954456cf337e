"""Command-line entry point: ``tinytm {simulate,train,tonemap,eval,report}``.

Exit codes: 0 success, 1 usage error, 2 data error. Every random choice is
derived from ``--seed`` (default 0).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import evalbench, pipeline
from .imageio import RawFormatError, UnsupportedImageError, read_raw, write_png8, write_raw
from .raster import HdrImage
from .simulate import DatasetFormatError, build_dataset, load_dataset
from .tinynn import (
    BudgetError,
    ShapeError,
    TrainConfig,
    WeightsFormatError,
    dataset_loss,
    init_weights,
    load_weights,
    save_weights,
    train,
)
from .tinynn.model import REFERENCE
from .tinynn.train import History

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
IMAGE_SUFFIXES = {".png"}

log = logging.getLogger("tinytm")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _image_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"not a directory: {d}")
    files = sorted(p for p in d.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise DataError(f"no images found in {d}")
    return files


def _need_file(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {p}")
    return p


def _need_parent(path) -> Path:
    p = Path(path)
    if not p.parent.is_dir():
        raise UsageError(f"output directory does not exist: {p.parent}")
    return p


def cmd_simulate(args) -> int:
    files = _image_files(args.images)
    out = _need_parent(args.out)
    if args.curves_per_image < 1:
        raise UsageError("--curves-per-image must be at least 1")
    summary = build_dataset(files, out, args.curves_per_image, args.seed, args.emit_hdr)
    print(f"samples={summary.samples} skipped={summary.skipped}")
    if summary.samples == 0:
        raise DataError("no readable images in corpus")
    return EXIT_OK


def cmd_train(args) -> int:
    train_set = load_dataset(_need_file(args.train))
    val_set = load_dataset(_need_file(args.val))
    out = _need_parent(args.out)
    if len(train_set) == 0 or len(val_set) == 0:
        raise DataError("training and validation files must contain samples")
    try:
        cfg = TrainConfig(
            learning_rate=args.lr,
            batch_size=args.batch,
            max_epochs=args.epochs,
            seed=args.seed,
            cil_weight=args.lam,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if cfg.max_epochs == 0:
        w = init_weights(REFERENCE, np.random.default_rng(cfg.seed))
        hist = History(
            dataset_loss(w, train_set, cfg.cil_weight), dataset_loss(w, val_set, cfg.cil_weight)
        )
        w = w.astype(np.float32)
    else:
        w, hist = train(train_set, val_set, cfg)
    save_weights(w, out)
    history_path = Path(args.history) if args.history else out.with_suffix(out.suffix + ".history")
    history_path.write_text("\n".join(hist.lines()) + "\n")
    print(
        f"epochs={len(hist.epochs)} best_epoch={hist.best_epoch} "
        f"initial_val_loss={hist.initial_val_loss:.6f} best_val_loss={hist.best_val_loss:.6f}"
    )
    return EXIT_OK


def cmd_tonemap(args) -> int:
    img = read_raw(_need_file(args.input))
    if not isinstance(img, HdrImage):
        raise DataError("tonemap needs a 3-channel image")
    if img.bit_depth < 8:
        raise DataError(f"tonemap needs at least 8 bits per sample, got {img.bit_depth}")
    w = load_weights(_need_file(args.weights))
    out = _need_parent(args.out)
    curve = pipeline.curve_for(img, pipeline.predict_params(img, w))
    img12 = pipeline.apply_tonemap(img, curve)
    write_png8(pipeline.encode_srgb8(img12), out)
    if args.emit_curve:
        lines = [f"{x:.17g} {y:.17g}" for x, y in zip(curve.xs, curve.ys)]
        _need_parent(args.emit_curve).write_text("\n".join(lines) + "\n")
    if args.dump_12bit:
        write_raw(img12, _need_parent(args.dump_12bit))
    return EXIT_OK


def cmd_eval(args) -> int:
    files = _image_files(args.images)
    w = load_weights(_need_file(args.weights)) if args.weights else None
    if w is None and not args.oracle:
        raise UsageError("--weights is required unless --oracle is given")
    if args.oracle and args.linear12:
        raise UsageError("--oracle compares against the 8-bit source; drop --linear12")
    report = evalbench.evaluate(files, w, args.seed, oracle=args.oracle, linear12=args.linear12)
    if report.count == 0:
        raise DataError("no readable images in corpus")
    if args.report:
        report.write(_need_parent(args.report))
    s = report.summary()
    print(
        f"count={s['count']} mean_psnr_db={s['mean_psnr_db']} std_psnr_db={s['std_psnr_db']} "
        f"min_psnr_db={s['min_psnr_db']} exact={s['exact_matches']} skipped={s['skipped']}"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    w = load_weights(_need_file(args.weights)) if args.weights else None
    for k, v in evalbench.flops_report(w).items():
        print(f"{k}={v}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tinytm", description="Histogram-driven global tone mapping.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="build a training dataset from 8-bit images")
    s.add_argument("--images", required=True, help="directory of 8-bit PNG images")
    s.add_argument("--out", required=True, help="dataset text file to write")
    s.add_argument("--curves-per-image", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--emit-hdr", metavar="DIR", help="also write the degraded 26-bit images")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("train", help="train the network")
    t.add_argument("--train", required=True)
    t.add_argument("--val", required=True)
    t.add_argument("--out", required=True, help="weights file to write")
    t.add_argument("--history", help="per-epoch history file (default: OUT.history)")
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--lambda", dest="lam", type=float, default=1.0, help="curve-integral weight")
    t.set_defaults(func=cmd_train)

    m = sub.add_parser("tonemap", help="tone map a TGTM-RAW image to 8-bit PNG")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--weights", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--emit-curve", metavar="FILE", help="write the 49 curve knots as 'x y' lines")
    m.add_argument("--dump-12bit", metavar="RAW", help="write the 12-bit intermediate image")
    m.set_defaults(func=cmd_tonemap)

    e = sub.add_parser("eval", help="PSNR of predicted vs ground-truth tone mapping")
    e.add_argument("--images", required=True)
    e.add_argument("--weights")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--report", help="report file; a FILE.kv key=value copy is written too")
    e.add_argument("--oracle", action="store_true", help="use ground-truth parameters as predictions")
    e.add_argument("--linear12", action="store_true", help="compare 12-bit linear outputs")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="print the compute budget breakdown")
    r.add_argument("--weights")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"tinytm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        DataError,
        DatasetFormatError,
        RawFormatError,
        UnsupportedImageError,
        WeightsFormatError,
        BudgetError,
        ShapeError,
        OSError,
        ValueError,
    ) as exc:
        print(f"tinytm: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
