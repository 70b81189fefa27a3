"""Command-line entry point.

Subcommands cover the full experiment pipeline: synthetic store generation,
preprocessing to labeled image sets, offline mask augmentation, per-subject
training, leave-one-subject-out evaluation with report + figures, a
training-free correlation-classifier evaluation, and debug image export.

Configuration comes from a JSON file (--config) whose defaults match the
experiment protocol; command-line flags win over file values. Exit codes:
0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import net
from .augment import AugmentMode, expand_dataset
from .binio import FileFormatError
from .data import load_store, save_store
from .dataset import load_imageset, save_imageset
from .fbcca import FbccaConfig
from .harness import (
    ExperimentConfig,
    build_image_set,
    loso_split,
    run_experiment,
    SplitSpec,
    subject_seed,
)
from .params import ModelParams, load_params, save_params
from .preprocess import (
    BandSpec,
    StftConfig,
    WindowConfig,
    flatten_for_svm,
    resize_nearest_values,
    write_pgm,
)
from .report import write_report
from .svm import SvmTrainConfig, svm_train
from .synth import generate_store

SEED_ENV_VAR = "SSVEP_BENCH_SEED"


class UsageError(Exception):
    pass


DEFAULT_CONFIG = {
    "store": None,
    "classifier": "fbcca",
    "channels": ["Oz"],
    "apply_car": None,
    "augment_mode": "none",
    "window_s": 0.5,
    "displacement_s": 0.5,
    "seed": None,
    "subjects": None,
    "test_subject": None,
    "jobs": 1,
    "figures": True,
    "stft": {
        "fft_window_len": 125,
        "hop": 62,
        "window_fn": "rectangular",
        "db_floor_eps": 1e-10,
    },
    "bands": [[10.0, 18.0], [22.0, 26.0], [28.0, 32.0]],
    "split": {"train_fraction": 2.0 / 3.0, "val_fraction": 1.0 / 3.0},
    "fbcca": {
        "n_subbands": 7,
        "weight_a": 1.25,
        "weight_b": 0.25,
        "n_harmonics": 5,
        "candidate_freqs_hz": None,
        "subband_edges_hz": None,
    },
    "svm": {
        "lr": 0.01,
        "momentum": 0.9,
        "reg_c": 0.01,
        "batch_size": 128,
        "patience": 200,
        "max_epochs": 5000,
    },
    "cnn": {
        "lr": 0.001,
        "momentum": 0.9,
        "weight_decay": 0.01,
        "batch_size": 128,
        "patience": None,
        "max_epochs": None,
        "network": "default",
        "pretrained_params": None,
        "freeze_prefix": False,
    },
}


def _merge_config(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise UsageError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge_config(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    """Defaults <- JSON file <- CLI flags, rejecting unknown keys."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            document = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(document, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        cfg = _merge_config(cfg, document)
    cfg = _merge_config(cfg, overrides)
    if cfg["seed"] is None:
        cfg["seed"] = int(os.environ.get(SEED_ENV_VAR, "0"))
    return cfg


def _parse_duration(text: str) -> float:
    """Parse '0.5s' / '0.1s' / plain seconds into a float."""
    text = text.strip().lower()
    if text.endswith("s"):
        text = text[:-1]
    try:
        value = float(text)
    except ValueError as exc:
        raise UsageError(f"bad duration {text!r}; expected e.g. '0.5s'") from exc
    if value <= 0:
        raise UsageError(f"duration must be positive, got {value}")
    return value


def _window_config(cfg: dict, sample_rate_hz: float) -> WindowConfig:
    return WindowConfig(
        window_len_samples=int(round(cfg["window_s"] * sample_rate_hz)),
        displacement_samples=int(round(cfg["displacement_s"] * sample_rate_hz)),
    )


def _resolve_cnn_regime(cfg: dict) -> tuple[int, int]:
    """Early-stopping regime: tight with full masking, long from scratch."""
    patience, max_epochs = cfg["cnn"]["patience"], cfg["cnn"]["max_epochs"]
    if patience is None or max_epochs is None:
        if cfg["classifier"] == "cnn-scratch":
            auto = (2000, 5000)
        elif cfg["augment_mode"] == "full":
            auto = (50, 500)
        else:
            auto = (500, 5000)
        patience = auto[0] if patience is None else patience
        max_epochs = auto[1] if max_epochs is None else max_epochs
    return int(patience), int(max_epochs)


def experiment_config(cfg: dict, candidate_freqs: tuple[float, ...]) -> ExperimentConfig:
    patience, max_epochs = _resolve_cnn_regime(cfg)
    fb = cfg["fbcca"]
    edges = fb["subband_edges_hz"]
    return ExperimentConfig(
        classifier=cfg["classifier"],
        channels=tuple(cfg["channels"]),
        apply_car=cfg["apply_car"],
        window=WindowConfig(),  # replaced below once the store rate is known
        stft=StftConfig(
            fft_window_len=int(cfg["stft"]["fft_window_len"]),
            hop=int(cfg["stft"]["hop"]),
            window_fn=cfg["stft"]["window_fn"],
            db_floor_eps=float(cfg["stft"]["db_floor_eps"]),
        ),
        bands=BandSpec(tuple((lo, hi) for lo, hi in cfg["bands"])),
        augment_mode=AugmentMode(cfg["augment_mode"]),
        train_fraction=float(cfg["split"]["train_fraction"]),
        val_fraction=float(cfg["split"]["val_fraction"]),
        seed=int(cfg["seed"]),
        subjects=tuple(cfg["subjects"]) if cfg["subjects"] else None,
        fbcca=FbccaConfig(
            n_subbands=int(fb["n_subbands"]),
            weight_a=float(fb["weight_a"]),
            weight_b=float(fb["weight_b"]),
            n_harmonics=int(fb["n_harmonics"]),
            candidate_freqs_hz=tuple(fb["candidate_freqs_hz"] or candidate_freqs),
            subband_edges_hz=tuple((lo, hi) for lo, hi in edges) if edges else None,
        ),
        svm=SvmTrainConfig(
            lr=float(cfg["svm"]["lr"]),
            momentum=float(cfg["svm"]["momentum"]),
            reg_c=float(cfg["svm"]["reg_c"]),
            batch_size=int(cfg["svm"]["batch_size"]),
            patience=int(cfg["svm"]["patience"]),
            max_epochs=int(cfg["svm"]["max_epochs"]),
        ),
        cnn=net.TrainConfig(
            lr=float(cfg["cnn"]["lr"]),
            momentum=float(cfg["cnn"]["momentum"]),
            weight_decay=float(cfg["cnn"]["weight_decay"]),
            batch_size=int(cfg["cnn"]["batch_size"]),
            patience=patience,
            max_epochs=max_epochs,
        ),
        network=cfg["cnn"]["network"],
        pretrained_path=cfg["cnn"]["pretrained_params"],
        freeze_prefix=bool(cfg["cnn"]["freeze_prefix"]),
        jobs=int(cfg["jobs"]),
    )


def _print_config_and_exit(cfg: dict) -> int:
    print(json.dumps(cfg, indent=2, sort_keys=True))
    return 0


def _require(cfg: dict, key: str, flag: str) -> None:
    if cfg[key] is None:
        raise UsageError(f"{flag} (or config key {key!r}) is required")


def cmd_synth(args) -> int:
    snr = math.inf if args.snr_db.lower() in ("inf", "+inf", "infinity") else float(args.snr_db)
    store = generate_store(
        freqs=tuple(float(f) for f in args.freqs.split(",")),
        n_subjects=args.subjects,
        trials_per_freq=args.trials,
        snr_db=snr,
        seed=args.seed if args.seed is not None else int(os.environ.get(SEED_ENV_VAR, "0")),
        n_harmonics=args.n_harmonics,
        amplitude_decay=args.amplitude_decay,
        duration_s=args.duration_s,
        sample_rate_hz=args.sample_rate,
    )
    save_store(store, args.out)
    print(f"{len(store)} trials -> {args.out}")
    return 0


def cmd_preprocess(args) -> int:
    overrides: dict = {}
    if args.displacement is not None:
        overrides["displacement_s"] = _parse_duration(args.displacement)
    if args.window is not None:
        overrides["window_s"] = _parse_duration(args.window)
    if args.channel is not None:
        overrides["channels"] = [args.channel]
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = load_config(args.config, overrides)
    if args.print_config:
        return _print_config_and_exit(cfg)
    store_path = args.input or cfg["store"]
    if store_path is None:
        raise UsageError("--in (or config key 'store') is required")
    store = load_store(store_path)
    images = build_image_set(
        store,
        _window_config(cfg, store.sample_rate_hz),
        StftConfig(
            fft_window_len=int(cfg["stft"]["fft_window_len"]),
            hop=int(cfg["stft"]["hop"]),
            window_fn=cfg["stft"]["window_fn"],
            db_floor_eps=float(cfg["stft"]["db_floor_eps"]),
        ),
        BandSpec(tuple((lo, hi) for lo, hi in cfg["bands"])),
        channel=cfg["channels"][0],
        apply_car=cfg["apply_car"],
    )
    save_imageset(images, args.out)
    print(f"{len(images)} images")
    return 0


def cmd_augment(args) -> int:
    images = load_imageset(args.input)
    expanded = expand_dataset(images, AugmentMode(args.mode))
    save_imageset(expanded, args.out)
    print(f"{len(expanded)}")
    return 0


def cmd_train(args) -> int:
    overrides: dict = {}
    if args.classifier is not None:
        overrides["classifier"] = args.classifier
    if args.store is not None:
        overrides["store"] = args.store
    if args.test_subject is not None:
        overrides["test_subject"] = args.test_subject
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.augment_mode is not None:
        overrides["augment_mode"] = args.augment_mode
    cfg = load_config(args.config, overrides)
    if args.print_config:
        return _print_config_and_exit(cfg)
    if cfg["classifier"] not in ("svm", "cnn", "cnn-scratch"):
        raise UsageError(f"train supports svm/cnn/cnn-scratch, not {cfg['classifier']!r}")
    _require(cfg, "store", "--store")
    _require(cfg, "test_subject", "--test-subject")

    store = load_store(cfg["store"])
    exp = experiment_config(cfg, store.stimulus_frequencies())
    exp = replace(exp, window=_window_config(cfg, store.sample_rate_hz))
    images = build_image_set(
        store, exp.window, exp.stft, exp.bands, exp.channels[0], exp.apply_car
    )
    subject = int(cfg["test_subject"])
    sub_seed = subject_seed(exp.seed, subject)
    split = SplitSpec(
        test_subject_id=subject,
        train_fraction=exp.train_fraction,
        val_fraction=exp.val_fraction,
        seed=sub_seed,
    )
    train_idx, val_idx, _ = loso_split(images, split)
    train_set = images.subset(train_idx)
    if exp.augment_mode != AugmentMode.NONE:
        train_set = expand_dataset(train_set, exp.augment_mode)
    val_set = images.subset(val_idx)

    if cfg["classifier"] == "svm":
        x_train = np.stack([flatten_for_svm(im) for im in train_set.images])
        x_val = np.stack([flatten_for_svm(im) for im in val_set.images])
        y_train = np.where(train_set.class_idx > 0, 1.0, -1.0)
        y_val = np.where(val_set.class_idx > 0, 1.0, -1.0)
        model, log = svm_train(x_train, y_train, x_val, y_val, replace(exp.svm, seed=sub_seed))
        params = ModelParams()
        params.add("svm.weight", model.w)
        params.add("svm.bias", np.array([model.b]))
    else:
        spec = exp.network_spec()
        if cfg["classifier"] == "cnn" and exp.pretrained_path:
            params0 = net.replace_head(load_params(exp.pretrained_path), spec, seed=sub_seed)
            if exp.freeze_prefix:
                params0.set_frozen(lambda n: n.startswith("conv"))
        else:
            params0 = net.init_params(spec, seed=sub_seed)
        rows, cols = spec.input_shape[1], spec.input_shape[2]

        def inputs(s):
            resized = resize_nearest_values(np.asarray(s.images, dtype=np.float64), rows, cols)
            return resized[:, np.newaxis, :, :]

        params, log = net.train(
            spec, params0,
            inputs(train_set), train_set.class_idx.astype(np.int64),
            inputs(val_set), val_set.class_idx.astype(np.int64),
            replace(exp.cnn, seed=sub_seed),
        )

    save_params(params, args.out_params)
    log_path = args.out_log or Path(args.out_params).with_suffix(".log.csv")
    log.write_csv(log_path)
    best = log.records[log.best_epoch]
    print(
        f"test subject {subject}: best epoch {best.epoch}, "
        f"val_loss {best.val_loss:.6f}, val_acc {best.val_acc:.4f}"
    )
    return 0


def cmd_eval_loso(args) -> int:
    overrides: dict = {}
    if args.classifier is not None:
        overrides["classifier"] = args.classifier
    if args.store is not None:
        overrides["store"] = args.store
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.augment_mode is not None:
        overrides["augment_mode"] = args.augment_mode
    if args.no_figures:
        overrides["figures"] = False
    cfg = load_config(args.config, overrides)
    if args.print_config:
        return _print_config_and_exit(cfg)
    _require(cfg, "store", "--store")

    store = load_store(cfg["store"])
    exp = experiment_config(cfg, store.stimulus_frequencies())
    exp = replace(exp, window=_window_config(cfg, store.sample_rate_hz))
    report = run_experiment(store, exp)
    written = write_report(report, args.report, figures=cfg["figures"])
    print(f"mean accuracy {100.0 * report.mean_accuracy:.1f}%, mean F1 {report.mean_f1:.3f}")
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_fbcca(args) -> int:
    overrides: dict = {"classifier": "fbcca"}
    if args.channels is not None:
        overrides["channels"] = [c.strip() for c in args.channels.split(",") if c.strip()]
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    cfg = load_config(args.config, overrides)
    if args.print_config:
        return _print_config_and_exit(cfg)
    store = load_store(args.input)
    exp = experiment_config(cfg, store.stimulus_frequencies())
    exp = replace(exp, window=_window_config(cfg, store.sample_rate_hz))
    report = run_experiment(store, exp)
    print(f"mean accuracy {100.0 * report.mean_accuracy:.1f}%, mean F1 {report.mean_f1:.3f}")
    if args.report:
        for p in write_report(report, args.report, figures=cfg["figures"]):
            print(f"wrote {p}")
    return 0


def cmd_inspect(args) -> int:
    images = load_imageset(args.input)
    if not 0 <= args.image < len(images):
        raise UsageError(f"image index {args.image} out of range [0, {len(images)})")
    write_pgm(images.images[args.image].astype(np.float64), args.pgm)
    row = args.image
    print(
        f"image {row}: subject {int(images.subject_id[row])}, "
        f"stimulus {float(images.stimulus_hz[row]):g} Hz, "
        f"trial {int(images.trial_index[row])}, start {int(images.start_sample[row])}, "
        f"shape {images.image_shape[0]}x{images.image_shape[1]} -> {args.pgm}"
    )
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage failures exit 1, not argparse's 2
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssvep-bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic trial store")
    p.add_argument("--out", required=True)
    p.add_argument("--subjects", type=int, default=35)
    p.add_argument("--trials", type=int, default=6)
    p.add_argument("--snr-db", default="10")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--freqs", default="12,15")
    p.add_argument("--n-harmonics", type=int, default=2)
    p.add_argument("--amplitude-decay", type=float, default=1.0)
    p.add_argument("--duration-s", type=float, default=5.0)
    p.add_argument("--sample-rate", type=float, default=250.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="trial store -> labeled spectrogram images")
    p.add_argument("--in", dest="input", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--displacement", default=None, help="window displacement, e.g. 0.5s or 0.1s")
    p.add_argument("--window", default=None, help="window size, e.g. 0.5s")
    p.add_argument("--channel", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("augment", help="expand an image set with enumerated masks")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=[m.value for m in AugmentMode], required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train one classifier for one test subject")
    p.add_argument("--config", default=None)
    p.add_argument("--classifier", choices=["svm", "cnn", "cnn-scratch"], default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--test-subject", type=int, default=None)
    p.add_argument("--augment-mode", choices=[m.value for m in AugmentMode], default=None)
    p.add_argument("--out-params", required=True)
    p.add_argument("--out-log", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-loso", help="full leave-one-subject-out experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--report", required=True)
    p.add_argument("--classifier", choices=["fbcca", "svm", "cnn", "cnn-scratch", "majority"],
                   default=None)
    p.add_argument("--store", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--augment-mode", choices=[m.value for m in AugmentMode], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_eval_loso)

    p = sub.add_parser("fbcca", help="training-free correlation-classifier evaluation")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--channels", default=None, help="comma-separated channel names")
    p.add_argument("--report", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_fbcca)

    p = sub.add_parser("inspect", help="export one image as a PGM for inspection")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--image", type=int, required=True)
    p.add_argument("--pgm", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
