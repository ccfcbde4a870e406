"""Command-line pipeline: gen, train, eval, gradcheck, report.

Configuration comes from an optional JSON file (sections: seed, signal,
model, train) with command-line flags taking precedence. Every command
echoes its merged run configuration into its output location. Exit codes:
0 success, 2 configuration error, 3 data error, 4 numerical failure.

Heavy imports happen after thread setup so --threads can pin the BLAS
pool; --threads 1 makes runs bit-reproducible.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

OUTPUT_ROOT_ENV = "QSLA_OUTPUT_ROOT"
_CONFIG_SECTIONS = {"seed", "signal", "model", "train"}
_SIGNAL_KEYS = {"classes", "snrs", "frames_per_cell", "phase_offset",
                "max_freq_offset"}


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        from .errors import ConfigError

        raise ConfigError("--threads must be >= 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ[var] = str(n)


def _resolve_out(path: str) -> Path:
    p = Path(path)
    if p.is_absolute():
        return p
    return Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / p


def _load_config_file(path: str | None) -> dict:
    from .errors import ConfigError

    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    unknown = set(data) - _CONFIG_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for section in ("signal", "model", "train"):
        if section in data and not isinstance(data[section], dict):
            raise ConfigError(f"config section {section!r} must be an object")
    sig_unknown = set(data.get("signal", {})) - _SIGNAL_KEYS
    if sig_unknown:
        raise ConfigError(f"unknown signal config keys: {sorted(sig_unknown)}")
    return data


def _echo_run_config(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _seed_of(args, file_cfg: dict) -> int:
    if args.seed is not None:
        return args.seed
    return int(file_cfg.get("seed", 0))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    import numpy as np  # noqa: F401  (thread env already set)

    from .signal import CLASS_NAMES, ChannelConfig, generate_dataset
    from .signal.sigio import write_dataset

    file_cfg = _load_config_file(args.config)
    sig_cfg = dict(file_cfg.get("signal", {}))
    classes = (args.classes.split(",") if args.classes
               else sig_cfg.get("classes", list(CLASS_NAMES)))
    snrs = ([int(s) for s in args.snrs.split(",")] if args.snrs
            else sig_cfg.get("snrs", list(range(-20, 22, 2))))
    frames = (args.frames_per_cell if args.frames_per_cell is not None
              else int(sig_cfg.get("frames_per_cell", 100)))
    seed = _seed_of(args, file_cfg)
    channel = ChannelConfig(
        phase_offset=bool(sig_cfg.get("phase_offset", False)),
        max_freq_offset=float(sig_cfg.get("max_freq_offset", 0.0)),
    )
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    ds = generate_dataset(classes, snrs, frames, seed, channel=channel)
    crc = write_dataset(ds, out)
    _echo_run_config(Path(str(out) + ".run.json"), {
        "command": "gen",
        "seed": seed,
        "signal": {"classes": sorted(classes), "snrs": list(snrs),
                   "frames_per_cell": frames,
                   "phase_offset": channel.phase_offset,
                   "max_freq_offset": channel.max_freq_offset},
    })
    print(f"wrote {out} ({len(ds)} frames) and {out.stem}.splits")
    print(f"cells: {len(ds.meta.class_names)} classes x {len(ds.meta.snr_grid)}"
          f" SNRs x {frames} frames")
    print(f"crc32: {crc:#010x}")
    return 0


def cmd_train(args) -> int:
    import numpy as np

    from .model import QslaConfig, build_model
    from .signal.sigio import read_dataset
    from .training import TrainConfig, train

    file_cfg = _load_config_file(args.config)
    seed = _seed_of(args, file_cfg)

    model_cfg = dict(file_cfg.get("model", {}))
    ds = read_dataset(_resolve_out(args.dataset), require_split=True)
    model_cfg["num_classes"] = len(ds.meta.class_names)
    if args.width_scale is not None:
        model_cfg["width_scale"] = args.width_scale
    if args.dropout is not None:
        model_cfg["dropout_p"] = args.dropout
    config = QslaConfig.from_dict(model_cfg)

    train_cfg = dict(file_cfg.get("train", {}))
    train_cfg["seed"] = seed
    for key, value in (("lr0", args.lr), ("max_epochs", args.max_epochs),
                       ("batch_size", args.batch_size),
                       ("checkpoint_every", args.checkpoint_every)):
        if value is not None:
            train_cfg[key] = value
    tconfig = TrainConfig.from_dict(train_cfg)

    run_dir = _resolve_out(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    _echo_run_config(run_dir / "config.json", {
        "command": "train",
        "dataset": str(args.dataset),
        "variant": args.variant,
        "seed": seed,
        "model": config.to_dict(),
        "train": tconfig.__dict__,
    })
    model = build_model(args.variant, config, dtype=np.float32, seed=seed)
    records, _ = train(model, ds, tconfig, run_dir=run_dir)
    for r in records:
        print(f"epoch {r.epoch:3d}  train {r.train_loss:.4f}"
              f"  val {r.val_loss:.4f}  acc {r.val_accuracy:.4f}  lr {r.lr:.6g}")
    print(f"finished after {len(records)} epochs; final manifest:"
          f" {run_dir / 'final.qslaw'}")
    return 0


def cmd_eval(args) -> int:
    import numpy as np

    from .evaluation import build_eval_report, emit_reports
    from .model import build_model, load_manifest
    from .signal.sigio import read_dataset

    manifest = load_manifest(_resolve_out(args.manifest))
    ds = read_dataset(_resolve_out(args.dataset), require_split=True)
    model = build_model(manifest.variant, manifest.config, dtype=np.float32,
                        seed=0)
    model.load_manifest(manifest)

    epoch_seconds = None
    if args.run_dir:
        timing_path = _resolve_out(args.run_dir) / "timings.jsonl"
        if timing_path.exists():
            epoch_seconds = [json.loads(line)["seconds"]
                             for line in timing_path.read_text().splitlines()]
    snr_filter = [args.snr] if args.snr is not None else None
    report = build_eval_report(model, ds, batch_size=args.batch_size,
                               epoch_seconds=epoch_seconds,
                               snr_filter=snr_filter)
    out = _resolve_out(args.out)
    emit_reports(report, out, plots=args.plots)
    _echo_run_config(out / "config.json", {
        "command": "eval",
        "manifest": str(args.manifest),
        "dataset": str(args.dataset),
        "variant": manifest.variant,
        "model": manifest.config.to_dict(),
    })
    print(f"overall accuracy: {report.overall_accuracy:.4f}")
    print("snr_db  n  accuracy")
    for row in report.snr_accuracy:
        print(f"{row.snr_db:6d}  {row.n}  {row.accuracy:.4f}")
    if report.spearman_snr_accuracy is not None:
        print(f"spearman(SNR, accuracy) = {report.spearman_snr_accuracy:.3f}")
    print(f"reports written to {out}")
    return 0


def cmd_gradcheck(args) -> int:
    from .autodiff.gradcheck import layer_checks, model_check

    results = []
    if args.scope in ("layer", "all"):
        results.extend(layer_checks(seed=args.seed if args.seed is not None else 0))
    if args.scope in ("model", "all"):
        results.append(model_check(seed=args.seed if args.seed is not None else 0))
    for r in results:
        print(r.line())
    if all(r.passed for r in results):
        print(f"gradcheck passed ({len(results)} checks)")
        return 0
    print("gradcheck FAILED")
    return 4


def cmd_report(args) -> int:
    import numpy as np

    from .evaluation import complexity_report
    from .model import VARIANTS, QslaConfig, build_model

    variants = VARIANTS if args.variant == "all" else (args.variant,)
    blocks = []
    print(f"{'variant':>16}  {'params':>10}  {'params(no BN)':>13}  {'bytes':>10}")
    for variant in variants:
        config = QslaConfig(width_scale=args.width_scale,
                            num_classes=args.num_classes)
        model = build_model(variant, config, dtype=np.float32, seed=0)
        block = complexity_report(model)
        blocks.append(block)
        print(f"{variant:>16}  {block['trainable_parameters']:>10,}"
              f"  {block['trainable_parameters_excluding_batchnorm']:>13,}"
              f"  {block['manifest_bytes']:>10,}")
    if args.out:
        out = _resolve_out(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "complexity.json").write_text(
            json.dumps(blocks, indent=2, sort_keys=True) + "\n")
        print(f"wrote {out / 'complexity.json'}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsla",
        description="Quad-stream BiLSTM-attention modulation classifier pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="JSON config file (flags take precedence)")
        p.add_argument("--seed", type=int, default=None, help="run seed")
        p.add_argument("--threads", type=int, default=None,
                       help="BLAS thread count (1 = bit-reproducible)")
        p.formatter_class = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen", help="generate a synthetic dataset (.sigds + .splits)")
    common(p)
    p.add_argument("--out", required=True, help="output dataset path (.sigds)")
    p.add_argument("--classes", default=None,
                   help="comma-separated class names (default: all 10)")
    p.add_argument("--snrs", default=None,
                   help="comma-separated SNRs in dB (default: -20..20 step 2)")
    p.add_argument("--frames-per-cell", type=int, default=None,
                   help="frames per (class, SNR) cell (default 100)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model variant on a dataset")
    common(p)
    p.add_argument("--dataset", required=True, help="input .sigds path")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--variant", default="qsla",
                   choices=("qsla", "only-bilstm", "only-attention", "refcnn"))
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=128,
                   help="desk-scale default; full recipe uses 1024")
    p.add_argument("--width-scale", type=float, default=0.5,
                   help="conv filter / LSTM cell multiplier")
    p.add_argument("--lr", type=float, default=None, help="initial learning rate")
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--checkpoint-every", type=int, default=None,
                   help="periodic checkpoint cadence in epochs (0 = off)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a manifest and emit report files")
    common(p)
    p.add_argument("--manifest", required=True, help=".qslaw weight manifest")
    p.add_argument("--dataset", required=True, help="input .sigds path")
    p.add_argument("--out", required=True, help="report output directory")
    p.add_argument("--snr", type=int, default=None,
                   help="restrict per-SNR confusion output to this SNR")
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--run-dir", default=None,
                   help="training run directory (for epoch timings)")
    p.add_argument("--plots", action="store_true", help="also render SVG plots")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck",
                       help="finite-difference verification of all gradients")
    common(p)
    p.add_argument("--scope", default="all", choices=("layer", "model", "all"))
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("report", help="complexity accounting per variant")
    common(p)
    p.add_argument("--variant", default="all",
                   choices=("all", "qsla", "only-bilstm", "only-attention",
                            "refcnn"))
    p.add_argument("--width-scale", type=float, default=1.0)
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--out", default=None,
                   help="directory for complexity.json (default: print only)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    from .errors import ConfigError, DataError, NumericalError

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
