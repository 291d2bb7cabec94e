"""Command-line interface.

Exit codes: 0 success, 1 contract/usage error, 2 I/O or container format
error.  ``--config`` reads a flat key-value file; repeated ``--set key=value``
flags override individual entries.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .data import synth_dataset
from .errors import ContractError, FormatError
from .gradcheck import TOLERANCE, run_all
from .metrics import csv_header, evaluate
from .model import Model
from .raster import (
    LabelMap,
    Raster,
    TileSpec,
    load_labels,
    load_raster,
    parse_band_list,
    save_labels,
    save_prediction,
    save_raster,
    tile_offsets,
)
from .train import train as run_train
from .wavelet import max_reconstruction_error


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _load_flat_config(args):
    cfg = cfgmod.parse_config_file(args.config) if args.config else {}
    return cfgmod.apply_overrides(cfg, getattr(args, "set", None))


def _dataset_pairs(directory):
    directory = Path(directory)
    pairs = []
    for raster_path in sorted(directory.glob("*.msrs")):
        label_path = raster_path.with_suffix(".lbls")
        if not label_path.exists():
            raise ContractError(f"no label file next to {raster_path}")
        pairs.append((load_raster(raster_path), load_labels(label_path)))
    if not pairs:
        raise ContractError(f"no .msrs files under {directory}")
    return pairs


def _obtain_data(args, flat):
    if args.data:
        return _dataset_pairs(args.data)
    return synth_dataset(
        seed=args.seed,
        n_samples=args.n,
        size=int(flat.get("model.tile", 32)),
        n_classes=int(flat.get("model.n_classes", 6)),
    )


def cmd_synth(args):
    data = synth_dataset(args.seed, args.n, args.size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, (raster, labels) in enumerate(data):
        save_raster(raster, out / f"sample_{i:03d}.msrs")
        save_labels(labels, out / f"sample_{i:03d}.lbls")
    print(f"wrote {len(data)} samples to {out}")
    return 0


def cmd_train(args):
    flat = _load_flat_config(args)
    mcfg = cfgmod.model_config(flat)
    tcfg = cfgmod.train_config(flat)
    if args.steps is not None:
        tcfg.steps = args.steps
    data = _obtain_data(args, flat)
    model = Model(mcfg, seed=tcfg.seed)
    report_every = max(1, tcfg.steps // 5)

    def progress(step, value):
        if (step + 1) % report_every == 0:
            print(f"step {step + 1}/{tcfg.steps}: loss {value:.4f}")

    losses = run_train(model, data, tcfg, on_step=progress)
    model.save(args.out)
    cfgmod.dump_config(flat, f"{args.out}.cfg")
    report = evaluate(model, data)
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as fh:
            fh.write(csv_header(mcfg.n_classes) + "\n")
            fh.write(report.csv_row("train") + "\n")
    final = losses[-1] if losses else float("nan")
    print(f"trained {tcfg.steps} steps; final loss {final:.6f}; "
          f"train oa {report.oa:.4f} miou {report.miou:.4f}")
    print(f"checkpoint: {args.out}")
    return 0


def cmd_eval(args):
    flat = _load_flat_config(args)
    mcfg = cfgmod.model_config(flat)
    model = Model(mcfg, seed=int(flat.get("train.seed", 0)))
    model.load(args.ckpt)
    data = _dataset_pairs(args.data)
    report = evaluate(model, data)
    lines = [csv_header(mcfg.n_classes), report.csv_row(args.split)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_predict(args):
    flat = _load_flat_config(args)
    mcfg = cfgmod.model_config(flat)
    model = Model(mcfg, seed=int(flat.get("train.seed", 0)))
    model.load(args.ckpt)
    bands = parse_band_list(args.bands) if args.bands else None
    raster = load_raster(args.raster, band_tags=bands)
    window = args.window or mcfg.tile
    stride = args.stride or window
    if window != mcfg.tile:
        raise ContractError(
            f"window {window} must match the model tile size {mcfg.tile}"
        )
    spec = TileSpec(window=window, stride=stride)
    rows = tile_offsets(raster.height, spec.window, spec.stride)
    cols = tile_offsets(raster.width, spec.window, spec.stride)
    acc = np.zeros((mcfg.n_classes, raster.height, raster.width))
    hits = np.zeros((raster.height, raster.width))
    for r in rows:
        for c in cols:
            crop = Raster(
                raster.data[r : r + window, c : c + window].copy(),
                raster.bands,
                bit_depth=raster.bit_depth,
            )
            result = model.forward(crop)
            acc[:, r : r + window, c : c + window] += result.fused_soft.data
            hits[r : r + window, c : c + window] += 1.0
    fused = acc / hits
    prediction = LabelMap(np.argmax(fused, axis=0), n_classes=mcfg.n_classes)
    save_prediction(prediction, args.out)
    print(f"prediction: {args.out} (palette image: {args.out}.ppm)")
    return 0


def cmd_roundtrip_check(args):
    worst = max_reconstruction_error(
        args.size, args.levels, channels=args.channels, trials=args.trials
    )
    print(f"max reconstruction error: {worst:.3e} "
          f"(size {args.size}, levels {args.levels}, channels {args.channels})")
    return 0 if worst <= 1e-10 else 1


def cmd_gradcheck(args):
    results = run_all(seed=args.seed)
    width = max(len(name) for name, _ in results)
    ok = True
    print(f"{'block'.ljust(width)}  max_rel_err  status")
    for name, err in results:
        passed = err <= TOLERANCE
        ok &= passed
        print(f"{name.ljust(width)}  {err:.3e}    {'ok' if passed else 'FAIL'}")
    return 0 if ok else 1


def build_parser():
    parser = _Parser(prog="waveseg",
                     description="Multi-branch multispectral segmentation tools")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key-value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config entry (repeatable)")

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train a model")
    common(p)
    p.add_argument("--data", help="directory of .msrs/.lbls pairs (default: synthesize)")
    p.add_argument("--seed", type=int, default=0, help="synthetic data seed")
    p.add_argument("--n", type=int, default=16, help="synthetic sample count")
    p.add_argument("--steps", type=int, default=None, help="override train.steps")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--metrics", help="write a metrics CSV here")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="predict a full raster with tiling")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--raster", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--bands", help="comma-separated band tags, e.g. nir,red,green,blue")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("roundtrip-check", help="verify lossless reconstruction")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(fn=cmd_roundtrip_check)

    p = sub.add_parser("gradcheck", help="finite-difference check of every block")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
