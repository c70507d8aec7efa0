"""Command-line entry point.

    fallwatch <gen|train|prune|eval|sweep|stream|notify-test> [flags]

Exit codes: 0 success, 1 validation error (bad flags, bad files,
misconfiguration), 2 runtime error.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import data as fwdata
from . import metrics as fwmetrics
from . import notify as fwnotify
from . import plots as fwplots
from . import pruning as fwpruning
from .errors import FallwatchError, InvalidInputError, InvalidSpecError
from .model_io import load_fingerprint, load_model, save_model
from .network import init_model, predict_proba
from .optim import TrainConfig, train
from .signals import FilterSpec, PreprocessConfig
from .stream import (
    FallAlert,
    LiveRunner,
    StreamConfig,
    frames_from_recordings,
    stream_infer,
)


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_shared(p):
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 0 / model fingerprint)")
    p.add_argument("--sample-rate-hz", type=float, default=50.0, help="sensor sample rate")
    p.add_argument("--window", type=int, default=50, help="window length in samples")
    p.add_argument("--stride", type=int, default=25, help="window stride in samples")


def _add_preprocess(p):
    p.add_argument("--median-window", type=int, default=3, help="median filter width (odd)")
    p.add_argument("--no-median", action="store_true", help="disable the median filter")
    p.add_argument("--cutoff-hz", type=float, default=5.0, help="low-pass cutoff frequency")
    p.add_argument("--filter-order", type=int, default=4, help="low-pass filter order")
    p.add_argument("--no-lowpass", action="store_true", help="disable the low-pass filter")


def _preprocess_from_args(args):
    median = None if args.no_median else args.median_window
    lowpass = None if args.no_lowpass else FilterSpec(cutoff_hz=args.cutoff_hz, order=args.filter_order)
    if median is None and lowpass is None:
        return None
    return PreprocessConfig(median_window=median, lowpass=lowpass)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fallwatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[], help="write a synthetic dataset CSV", add_help=True)
    _add_shared(p)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--scale", type=float, default=1.0, help="scale the per-activity window counts")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a classifier on a dataset CSV")
    _add_shared(p)
    _add_preprocess(p)
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--out", required=True, help="model file to write (.fwm.json)")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--test-fraction", type=float, default=0.176)
    p.add_argument("--norm", choices=["minmax", "zscore"], default="minmax")
    p.add_argument("--no-early-stop", action="store_true", help="always run the full epoch budget")
    p.add_argument("--history-csv", default=None, help="where to write the per-epoch history")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.add_argument("--quiet", action="store_true", help="suppress per-epoch progress lines")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="magnitude-prune a trained model, then fine-tune")
    _add_shared(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="pruned model file to write")
    p.add_argument("--sparsity", type=float, default=0.3)
    p.add_argument("--finetune-epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--test-fraction", type=float, default=0.176)
    p.add_argument("--per-tensor", action="store_true", help="rank magnitudes per tensor, not globally")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("eval", help="evaluate a model on the dataset's test split")
    _add_shared(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--test-fraction", type=float, default=0.176)
    p.add_argument("--threshold", type=float, default=0.5, help="fall decision threshold")
    p.add_argument("--out-dir", default=".", help="directory for report JSON, ROC CSV and figures")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="prune/fine-tune across a sparsity band and report")
    _add_shared(p)
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--sparsities", default="0.1,0.2,0.3", help="comma-separated sparsity targets")
    p.add_argument("--finetune-epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--test-fraction", type=float, default=0.176)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out-csv", default="sweep.csv")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stream", help="replay or simulate a sensor feed and emit alerts")
    _add_shared(p)
    p.add_argument("--model", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--replay", help="dataset CSV to replay as a live feed")
    src.add_argument("--simulate", help="activity code/name to synthesize and stream")
    p.add_argument("--duration-s", type=float, default=5.5, help="length of the simulated feed")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--consecutive", type=int, default=3, help="consecutive hot windows before alerting")
    p.add_argument("--refractory-s", type=float, default=10.0)
    p.add_argument("--webhook-url", default=None, help=f"alert endpoint (falls back to ${fwnotify.WEBHOOK_ENV_VAR})")
    p.add_argument("--device-id", default="dev0")
    p.add_argument("--log-csv", default=None, help="per-window probability log")
    p.add_argument("--journal", default=None, help="append-only journal for failed deliveries")
    p.add_argument("--realtime", action="store_true", help="pace frames at the sample rate (threaded)")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("notify-test", help="send a test alert to the webhook")
    p.add_argument("--webhook-url", default=None)
    p.add_argument("--device-id", default="dev0")
    p.set_defaults(func=cmd_notify_test)

    return parser


def _load_split_for_model(model, args, *, refit=False, norm_mode="minmax"):
    recordings = fwdata.load_csv(args.data, default_sample_rate_hz=args.sample_rate_hz)
    seed = args.seed
    if seed is None:
        fp = load_fingerprint(args.model) if hasattr(args, "model") else None
        seed = (fp or {}).get("seed", 0)
    split, norm = fwdata.prepare_split(
        recordings,
        preprocess=model.preprocess,
        window_len=model.window_len,
        stride=args.stride,
        test_fraction=args.test_fraction,
        seed=seed,
        norm_mode=norm_mode,
        norm_params=None if refit else model.norm_params,
    )
    return split, norm


def _classification(model, windows, threshold=0.5):
    x, y = fwdata.windows_to_arrays(windows)
    if x.shape[0] == 0:
        raise InvalidInputError("no test windows; check --test-fraction and the dataset")
    probs = predict_proba(model, x)
    scores = probs[:, 1]
    preds = (scores >= threshold).astype(int)
    cm = fwmetrics.confusion(y, preds)
    rep = fwmetrics.report(cm)
    points = fwmetrics.roc(y, scores)
    return rep, points, fwmetrics.auc(points), scores


def cmd_gen(args) -> int:
    seed = 0 if args.seed is None else args.seed
    config = fwdata.GenConfig(
        seed=seed,
        sample_rate_hz=args.sample_rate_hz,
        counts=fwdata.scaled_counts(args.scale),
        window_len=args.window,
        stride=args.stride,
    )
    recordings = fwdata.generate_synthetic(config)
    fwdata.write_csv(recordings, args.out)
    n_windows = sum(len(fwdata.make_windows(r, args.window, args.stride)) for r in recordings)
    print(f"wrote {len(recordings)} recordings ({n_windows} windows at stride {args.stride}) to {args.out}")
    return 0


def _train_fingerprint(seed, config: TrainConfig, extra: dict) -> dict:
    blob = {
        "learning_rate": config.learning_rate,
        "beta1": config.beta1,
        "beta2": config.beta2,
        "epsilon": config.epsilon,
        "batch_size": config.batch_size,
        "epochs": config.epochs,
        "shuffle": config.shuffle,
        **extra,
    }
    digest = hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()
    return {"seed": seed, "config_hash": digest[:16]}


def cmd_train(args) -> int:
    seed = 0 if args.seed is None else args.seed
    recordings = fwdata.load_csv(args.data, default_sample_rate_hz=args.sample_rate_hz)
    preprocess = _preprocess_from_args(args)
    split, norm = fwdata.prepare_split(
        recordings,
        preprocess=preprocess,
        window_len=args.window,
        stride=args.stride,
        test_fraction=args.test_fraction,
        seed=seed,
        norm_mode=args.norm,
    )
    model = init_model(
        seed,
        window_len=args.window,
        dropout_rate=args.dropout,
        norm_params=norm,
        preprocess=preprocess,
        sample_rate_hz=args.sample_rate_hz,
    )
    config = TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=seed,
        early_stopping=not args.no_early_stop,
    )
    if args.epochs == 0:
        print("warning: --epochs 0, saving the model at initialization", file=sys.stderr)
        trained, history = model, None
    else:
        progress = None
        if not args.quiet:
            def progress(epoch, history):
                print(
                    f"epoch {epoch + 1:3d}/{config.epochs}  "
                    f"train_loss={history.train_loss[-1]:.4f} train_acc={history.train_acc[-1]:.4f}  "
                    f"test_loss={history.test_loss[-1]:.4f} test_acc={history.test_acc[-1]:.4f}"
                )
        trained, history = train(model, split, config, progress=progress)

    fingerprint = _train_fingerprint(
        seed, config,
        {"window": args.window, "stride": args.stride, "test_fraction": args.test_fraction, "norm": args.norm},
    )
    save_model(trained, args.out, fingerprint=fingerprint)
    print(f"saved model to {args.out}")
    if history is not None and len(history) > 0:
        history_csv = args.history_csv or str(Path(args.out).with_suffix("")) + ".history.csv"
        history.to_csv(history_csv)
        print(f"wrote history to {history_csv}")
        if not args.no_figures:
            fig_path = str(Path(history_csv).with_suffix("")) + ".png"
            fwplots.plot_history(history, fig_path)
            print(f"wrote figure {fig_path}")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.model)
    split, _ = _load_split_for_model(model, args)
    rep, points, auc_value, _ = _classification(model, split.test, args.threshold)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "eval_report.json"
    payload = rep.to_dict()
    payload["auc"] = auc_value
    payload["n_test_windows"] = len(split.test)
    payload["threshold"] = args.threshold
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    roc_path = out_dir / "roc.csv"
    fwmetrics.roc_to_csv(points, roc_path)
    print(rep.format_table())
    print(f"auc {auc_value:.4f}   ({len(split.test)} test windows)")
    print(f"wrote {report_path} and {roc_path}")
    if not args.no_figures:
        fwplots.plot_roc(points, auc_value, out_dir / "roc.png")
        fwplots.plot_confusion(rep.confusion, out_dir / "confusion.png")
        print(f"wrote figures to {out_dir}/roc.png and {out_dir}/confusion.png")
    return 0


def cmd_prune(args) -> int:
    model = load_model(args.model)
    split, _ = _load_split_for_model(model, args)
    compressed = fwpruning.magnitude_prune(model, args.sparsity, per_tensor=args.per_tensor)
    if args.finetune_epochs > 0:
        seed = args.seed if args.seed is not None else (load_fingerprint(args.model) or {}).get("seed", 0)
        config = TrainConfig(
            learning_rate=args.lr,
            batch_size=args.batch_size,
            epochs=args.finetune_epochs,
            seed=seed,
            early_stopping=False,
        )
        compressed, _ = fwpruning.finetune(compressed, split, config)
    save_model(compressed.model, args.out, mask=compressed.mask,
               fingerprint=load_fingerprint(args.model))
    rep, _, auc_value, _ = _classification(compressed.model, split.test)
    achieved = fwpruning.sparsity(compressed)
    print(f"sparsity {achieved:.4f} (target {args.sparsity})  "
          f"MAC fraction {fwpruning.mac_fraction(compressed):.4f}")
    print(f"fall recall {rep.sensitivity:.4f}  specificity {rep.specificity:.4f}  "
          f"accuracy {rep.accuracy:.4f}  auc {auc_value:.4f}")
    print(f"saved pruned model to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    model = load_model(args.model)
    split, _ = _load_split_for_model(model, args)
    try:
        sparsities = [float(s) for s in args.sparsities.split(",") if s.strip()]
    except ValueError:
        raise InvalidSpecError(f"bad --sparsities value {args.sparsities!r}") from None
    seed = args.seed if args.seed is not None else (load_fingerprint(args.model) or {}).get("seed", 0)
    rows = []
    for target in sparsities:
        compressed = fwpruning.magnitude_prune(model, target)
        if args.finetune_epochs > 0:
            config = TrainConfig(
                learning_rate=args.lr,
                batch_size=args.batch_size,
                epochs=args.finetune_epochs,
                seed=seed,
                early_stopping=False,
            )
            compressed, _ = fwpruning.finetune(compressed, split, config)
        rep, _, _, _ = _classification(compressed.model, split.test, args.threshold)
        rows.append((
            fwpruning.sparsity(compressed),
            rep.accuracy,
            rep.sensitivity,
            rep.specificity,
            fwpruning.mac_fraction(compressed),
        ))
        print(f"sparsity {rows[-1][0]:.3f}: accuracy {rep.accuracy:.4f} "
              f"fall recall {rep.sensitivity:.4f} specificity {rep.specificity:.4f} "
              f"MAC fraction {rows[-1][4]:.4f}")
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sparsity", "accuracy", "recall_fall", "specificity", "macs_fraction"])
        writer.writerows(rows)
    print(f"wrote {args.out_csv}")
    if not args.no_figures:
        fig_path = str(Path(args.out_csv).with_suffix("")) + ".png"
        fwplots.plot_sweep(rows, fig_path)
        print(f"wrote figure {fig_path}")
    return 0


def _simulate_recordings(args, model):
    code = args.simulate if args.simulate in fwdata.ALL_CODES else fwdata.CODE_BY_NAME.get(args.simulate)
    if code is None:
        raise InvalidSpecError(
            f"unknown activity {args.simulate!r}; use one of {', '.join(fwdata.ALL_CODES)} "
            f"or their names ({', '.join(fwdata.CODE_BY_NAME)})"
        )
    rate = model.sample_rate_hz
    total = max(model.window_len, int(args.duration_s * rate))
    n_windows = (total - model.window_len) // args.stride + 1
    per_rec = fwdata.GenConfig().fall_windows_per_recording if code in fwdata.FALL_CODES else n_windows
    config = fwdata.GenConfig(
        seed=0 if args.seed is None else args.seed,
        sample_rate_hz=rate,
        counts={code: int(n_windows)},
        window_len=model.window_len,
        stride=args.stride,
        adl_windows_per_recording=max(1, int(n_windows)),
        fall_windows_per_recording=per_rec,
    )
    return fwdata.generate_synthetic(config)


def cmd_stream(args) -> int:
    model = load_model(args.model)
    if args.replay:
        recordings = fwdata.load_csv(args.replay, default_sample_rate_hz=args.sample_rate_hz)
    else:
        recordings = _simulate_recordings(args, model)
    frames = frames_from_recordings(recordings)
    config = StreamConfig(
        threshold=args.threshold,
        consecutive_windows=args.consecutive,
        refractory_seconds=args.refractory_s,
        stride=args.stride,
        device_id=args.device_id,
    )
    webhook = args.webhook_url or os.environ.get(fwnotify.WEBHOOK_ENV_VAR)

    if args.realtime:
        deliver = None
        if webhook:
            def deliver(alert):
                return fwnotify.notify(alert, webhook, journal_path=args.journal)
        runner = LiveRunner(model, config, deliver=deliver)
        result = runner.run(frames, pace_s=1.0 / model.sample_rate_hz)
    else:
        result = stream_infer(frames, model, config)
        if webhook:
            for alert in result.alerts:
                outcome = fwnotify.notify(alert, webhook, journal_path=args.journal)
                status = "delivered" if outcome.delivered else f"FAILED ({outcome.error})"
                print(f"alert window {alert.window_index}: {status} after {outcome.attempts} attempt(s)")

    for alert in result.alerts:
        print(f"FALL ALERT  t={alert.event_time:.2f}s  p={alert.probability:.3f}  "
              f"window={alert.window_index}  device={alert.device_id}")
    print(f"{len(result.evaluations)} evaluations, {len(result.alerts)} alert(s), "
          f"{result.dropped_frames} dropped frame(s)")
    if args.log_csv:
        with open(args.log_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["window_index", "event_time", "p_fall", "alerted"])
            for ev in result.evaluations:
                writer.writerow([ev.window_index, ev.event_time, ev.p_fall, int(ev.alerted)])
        print(f"wrote {args.log_csv}")
    return 0


def cmd_notify_test(args) -> int:
    webhook = args.webhook_url or os.environ.get(fwnotify.WEBHOOK_ENV_VAR)
    if not webhook:
        raise InvalidSpecError(f"no webhook URL: pass --webhook-url or set {fwnotify.WEBHOOK_ENV_VAR}")
    alert = FallAlert(event_time=time.time(), probability=1.0, window_index=0, device_id=args.device_id)
    outcome = fwnotify.notify(alert, webhook)
    if outcome.delivered:
        print(f"delivered in {outcome.attempts} attempt(s), HTTP {outcome.status_code}")
        return 0
    print(f"delivery failed after {outcome.attempts} attempt(s): {outcome.error}", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FallwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
