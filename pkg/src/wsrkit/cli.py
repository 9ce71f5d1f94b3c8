"""Command-line entry point.

Subcommands: ``gen`` (synthesize a dataset), ``split`` (stratified
hold-out), ``train``, ``eval`` and ``gradcheck``. Every file-producing run
writes a manifest JSON next to its outputs with the resolved config, the
seeds and content digests, so a run can be reproduced exactly from its
manifest.

Flag precedence: explicit flag > --config JSON file > built-in default.
Set WSR_THREADS to cap the numeric libraries' worker threads.
"""

from __future__ import annotations

import os

if os.environ.get("WSR_THREADS"):
    _n = os.environ["WSR_THREADS"]
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _n)

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .autograd import Tensor, finite_diff_check, square, tmean, tsum
from .autograd import conv1d, gap, linear, maxpool1d, relu, sigmoid, softmax, softmax_cross_entropy, soft_threshold, tabs
from .binfmt import FileFormatError
from .checkpoint import load_checkpoint, save_checkpoint
from .dataio import SplitSpec, read_wsig, stratified_split, write_wsig
from .drsn import DrsnConfig, DrsnModel, param_count
from .mixmatch import MixMatchConfig
from .sigsyn import SUPPORTED_CLASSES, SynthSpec, synth_dataset
from .train_eval import TrainConfig, emit_report, evaluate, train


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict, seeds: dict,
                    inputs: list[Path], outputs: list[Path], started: float,
                    name: str = "manifest.json") -> Path:
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "toolkit_version": __version__,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "duration_s": round(time.time() - started, 3),
    }
    path = out_dir / name
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser,
                       defaults: dict) -> argparse.Namespace:
    """Merge --config JSON under explicit flags, over built-in defaults."""
    overrides = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            overrides = json.load(fh)
        unknown = set(overrides) - set(defaults)
        if unknown:
            parser.error(f"--config contains unknown keys: {sorted(unknown)}")
    for key, default in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, overrides.get(key, default))
    return args


# -- gen ----------------------------------------------------------------------

_GEN_DEFAULTS = dict(classes=",".join(SUPPORTED_CLASSES), snr_min=-6.0, snr_max=12.0,
                     snr_step=2.0, per_cell=100, len=128, sps=8, rolloff=0.35, seed=0)


def cmd_gen(args, parser) -> int:
    _apply_config_file(args, parser, _GEN_DEFAULTS)
    if args.snr_step <= 0:
        parser.error("--snr-step must be positive")
    if args.snr_max < args.snr_min:
        parser.error("--snr-max must be >= --snr-min")
    classes = tuple(c.strip() for c in args.classes.split(",") if c.strip())
    snr_grid = tuple(np.arange(args.snr_min, args.snr_max + 1e-9, args.snr_step).tolist())
    started = time.time()
    try:
        spec = SynthSpec(classes=classes, per_cell=args.per_cell, snr_grid=snr_grid,
                         window_len=args.len, samples_per_symbol=args.sps,
                         rrc_rolloff=args.rolloff, seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    dataset = synth_dataset(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "dataset.wsig"
    write_wsig(dataset, out_path)
    _write_manifest(out_dir, "gen",
                    {k: getattr(args, k) for k in _GEN_DEFAULTS},
                    {"seed": args.seed}, [], [out_path], started)
    print(f"wrote {len(dataset)} records to {out_path}")
    return 0


# -- split --------------------------------------------------------------------

_SPLIT_DEFAULTS = dict(test_frac=0.20, labeled_frac=0.05, seed=0)


def cmd_split(args, parser) -> int:
    _apply_config_file(args, parser, _SPLIT_DEFAULTS)
    started = time.time()
    in_path = Path(args.in_path)
    if not in_path.exists():
        parser.error(f"input file {in_path} does not exist")
    dataset = read_wsig(in_path)
    try:
        spec = SplitSpec(labeled_frac=args.labeled_frac, test_frac=args.test_frac,
                         seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    labeled, unlabeled, test = stratified_split(dataset, spec)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    outputs = []
    for part, name in ((labeled, "labeled"), (unlabeled, "unlabeled"), (test, "test")):
        path = prefix.parent / f"{prefix.name}.{name}.wsig"
        write_wsig(part, path)
        outputs.append(path)
    _write_manifest(prefix.parent, "split",
                    {k: getattr(args, k) for k in _SPLIT_DEFAULTS} | {"in": str(in_path)},
                    {"seed": args.seed}, [in_path], outputs, started,
                    name=f"{prefix.name}.manifest.json")
    print(f"split {len(dataset)} records into {len(labeled)}/{len(unlabeled)}/{len(test)}"
          " (labeled/unlabeled/test)")
    return 0


# -- train --------------------------------------------------------------------

_TRAIN_DEFAULTS = dict(mode="supervised", epochs=50, lr=0.001, batch=64,
                       T=0.5, K=2, alpha=0.75, lambda_u=75.0, smooth_frac=0.05,
                       stacks=3, channels=32, kernel=3, fc_hidden=128, seed=0)


def cmd_train(args, parser) -> int:
    _apply_config_file(args, parser, _TRAIN_DEFAULTS)
    started = time.time()
    if args.mode == "mixmatch" and args.lambda_u > 0 and not args.unlabeled:
        parser.error("--mode mixmatch needs --unlabeled (or --lambda-u 0)")
    labeled_ds = read_wsig(args.labeled)
    inputs = [Path(args.labeled)]
    unlabeled_records = []
    if args.unlabeled:
        unl_ds = read_wsig(args.unlabeled)
        if unl_ds.header.length != labeled_ds.header.length:
            parser.error(
                f"frame length mismatch: labeled {labeled_ds.header.length}, "
                f"unlabeled {unl_ds.header.length}")
        if unl_ds.header.class_names != labeled_ds.header.class_names:
            parser.error("labeled and unlabeled datasets disagree on class names")
        unlabeled_records = unl_ds.records
        inputs.append(Path(args.unlabeled))
    val_records = None
    if args.val:
        val_records = read_wsig(args.val).records
        inputs.append(Path(args.val))

    try:
        dcfg = DrsnConfig(
            num_classes=len(labeled_ds.header.class_names),
            input_len=labeled_ds.header.length,
            num_stacks=args.stacks, channels=args.channels,
            rsu_kernel=args.kernel, fc_hidden=args.fc_hidden, seed=args.seed)
        mcfg = MixMatchConfig(T=args.T, K=args.K, alpha=args.alpha,
                              lambda_u=args.lambda_u, smooth_frac=args.smooth_frac,
                              seed=args.seed)
        tcfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr,
                           mode=args.mode, mixmatch=mcfg, seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = DrsnModel.init(dcfg)
    log = train(model, labeled_ds.records, unlabeled_records, tcfg, val=val_records)
    ckpt_path = out_dir / "checkpoint.wnet"
    save_checkpoint(model, ckpt_path)
    log_path = out_dir / "train_log.csv"
    log.write_csv(log_path)
    _write_manifest(out_dir, "train",
                    {k: getattr(args, k) for k in _TRAIN_DEFAULTS}
                    | {"labeled": args.labeled, "unlabeled": args.unlabeled, "val": args.val},
                    {"seed": args.seed}, inputs, [ckpt_path, log_path], started)
    final = log.epochs[-1]
    print(f"trained {args.epochs} epochs; final loss {final.loss:.4f}; "
          f"{param_count(model)} parameters; checkpoint at {ckpt_path}")
    return 0


# -- eval ---------------------------------------------------------------------

def cmd_eval(args, parser) -> int:
    started = time.time()
    model = load_checkpoint(args.model)
    dataset = read_wsig(args.data)
    report = evaluate(model, dataset.records)
    formats = tuple(f.strip() for f in args.format.split(",") if f.strip())
    bad = set(formats) - {"csv", "json"}
    if bad:
        parser.error(f"unknown report formats: {sorted(bad)}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = emit_report(report, out_dir, formats=formats)
    _write_manifest(out_dir, "eval",
                    {"model": args.model, "data": args.data, "format": args.format},
                    {}, [Path(args.model), Path(args.data)],
                    [Path(p) for p in written], started)
    print(f"accuracy {report.overall_acc:.4f} over {report.correct + report.wrong} records")
    return 0


# -- gradcheck ------------------------------------------------------------------

def operator_gradchecks(seed: int = 0) -> dict[str, float]:
    """Finite-difference error for every differentiable operator.

    Inputs are nudged away from the relu/abs/threshold kinks so the
    numeric derivative is well defined.
    """
    rng = np.random.default_rng(seed)

    def away_from_zero(shape, margin=0.25):
        v = rng.normal(size=shape)
        return v + margin * np.sign(v)

    x3 = Tensor(away_from_zero((4, 8, 16)), dtype=np.float64)
    w = Tensor(rng.normal(size=(6, 8, 3)) * 0.4, dtype=np.float64)
    b = Tensor(rng.normal(size=(6,)) * 0.1, dtype=np.float64)
    x2 = Tensor(rng.normal(size=(4, 8)), dtype=np.float64)
    w2 = Tensor(rng.normal(size=(5, 8)) * 0.4, dtype=np.float64)
    b2 = Tensor(rng.normal(size=(5,)) * 0.1, dtype=np.float64)
    tau = Tensor(np.abs(rng.normal(size=(4, 8))) * 0.2 + 0.05, dtype=np.float64)
    targets = Tensor(np.full((4, 5), 0.2), dtype=np.float64)
    logits = Tensor(rng.normal(size=(4, 5)), dtype=np.float64)

    checks = {
        "conv1d/input": lambda: finite_diff_check(
            lambda z: tmean(square(conv1d(z, w, b, "same"))), x3),
        "conv1d/weight": lambda: finite_diff_check(
            lambda z: tmean(square(conv1d(x3, z, b, "valid"))), w),
        "conv1d/bias": lambda: finite_diff_check(
            lambda z: tmean(square(conv1d(x3, w, z, "same"))), b),
        "linear/input": lambda: finite_diff_check(
            lambda z: tmean(square(linear(z, w2, b2))), x2),
        "linear/weight": lambda: finite_diff_check(
            lambda z: tmean(square(linear(x2, z, b2))), w2),
        "relu": lambda: finite_diff_check(lambda z: tsum(square(relu(z))), x3),
        "sigmoid": lambda: finite_diff_check(lambda z: tsum(square(sigmoid(z))), x3),
        "abs": lambda: finite_diff_check(lambda z: tsum(square(tabs(z))), x3),
        "maxpool1d": lambda: finite_diff_check(lambda z: tsum(square(maxpool1d(z))), x3),
        "gap": lambda: finite_diff_check(lambda z: tsum(square(gap(z))), x3),
        "softmax": lambda: finite_diff_check(lambda z: tsum(square(softmax(z))), logits),
        "softmax_cross_entropy": lambda: finite_diff_check(
            lambda z: softmax_cross_entropy(z, targets), logits),
        "soft_threshold/input": lambda: finite_diff_check(
            lambda z: tsum(square(soft_threshold(z, tau))), x3),
        "soft_threshold/tau": lambda: finite_diff_check(
            lambda z: tsum(square(soft_threshold(x3, z))), tau),
    }
    return {name: fn() for name, fn in checks.items()}


def cmd_gradcheck(args, parser) -> int:
    started = time.time()
    results = operator_gradchecks(seed=args.seed)
    tol = 1e-4
    failed = []
    for name, err in results.items():
        status = "ok" if err < tol else "FAIL"
        print(f"{name:28s} {err:12.3e}  {status}")
        if err >= tol:
            failed.append(name)
    print(f"checked {len(results)} operators in {time.time() - started:.1f}s")
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return 1
    print("all operator gradients verified")
    return 0


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsrkit", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"wsrkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a modulated-signal dataset")
    p.add_argument("--classes", type=str, default=None,
                   help=f"comma-separated subset of {','.join(SUPPORTED_CLASSES)}")
    p.add_argument("--snr-min", dest="snr_min", type=float, default=None)
    p.add_argument("--snr-max", dest="snr_max", type=float, default=None)
    p.add_argument("--snr-step", dest="snr_step", type=float, default=None)
    p.add_argument("--per-cell", dest="per_cell", type=int, default=None)
    p.add_argument("--len", type=int, default=None)
    p.add_argument("--sps", type=int, default=None, help="samples per symbol")
    p.add_argument("--rolloff", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("split", help="stratified labeled/unlabeled/test split")
    p.add_argument("--in", dest="in_path", type=str, required=True)
    p.add_argument("--test-frac", dest="test_frac", type=float, default=None)
    p.add_argument("--labeled-frac", dest="labeled_frac", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out-prefix", dest="out_prefix", type=str, required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--labeled", type=str, required=True)
    p.add_argument("--unlabeled", type=str, default=None)
    p.add_argument("--val", type=str, default=None)
    p.add_argument("--mode", choices=("supervised", "mixmatch"), default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--T", type=float, default=None, help="sharpening temperature")
    p.add_argument("--K", type=int, default=None, help="augmentations per unlabeled example")
    p.add_argument("--alpha", type=float, default=None, help="Beta parameter for mixing")
    p.add_argument("--lambda-u", dest="lambda_u", type=float, default=None)
    p.add_argument("--smooth-frac", dest="smooth_frac", type=float, default=None)
    p.add_argument("--stacks", type=int, default=None)
    p.add_argument("--channels", type=int, default=None)
    p.add_argument("--kernel", type=int, default=None)
    p.add_argument("--fc-hidden", dest="fc_hidden", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", type=str, required=True)
    p.add_argument("--data", type=str, required=True)
    p.add_argument("--format", type=str, default="csv,json")
    p.add_argument("--out", type=str, required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of all operators")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
