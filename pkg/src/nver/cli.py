"""Command-line entry point.

Subcommands: ``train`` (k-fold experiment to a report JSON), ``evaluate``
(score a saved model on a dataset), ``gradcheck`` (64-bit finite-difference
suite), ``synth-data`` (synthetic embedding views), and ``report`` (render
a report JSON as a text table plus confusion CSVs).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
The fully resolved configuration of every run is echoed to the log;
``NVER_LOG_LEVEL`` picks the verbosity (error, info, debug).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path


from .data import load_dataset, save_dataset, synth_generate
from .errors import (
    ConfigError,
    DataError,
    LabelError,
    NumericError,
    ShapeError,
    StratificationError,
)
from .evaluation import TrainConfig, compute_metrics, run_experiment
from .gradcheck import standard_suite
from .losses import LossConfig
from .models import ModelSpec, load_model, save_model

log = logging.getLogger("nver")

_VIEWS_PER_KIND = {"FCN": 1, "CNN": 1, "CONCAT": 2, "RENO": 2}


def _configure_logging() -> None:
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    level = levels.get(os.environ.get("NVER_LOG_LEVEL", "info").lower(), logging.INFO)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)  # basicConfig is a no-op once handlers exist


def _echo_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "handler"}
    log.info("resolved configuration: %s", json.dumps(resolved, default=str))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nver",
        description="Train and evaluate emotion classifiers over audio foundation-model embeddings.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    train = sub.add_parser("train", help="run a k-fold experiment and write a report JSON")
    train.add_argument("--model", required=True, choices=["fcn", "cnn", "concat", "reno"])
    train.add_argument("--embeddings", required=True,
                       help="comma-separated embedding file paths (1 or 2 views)")
    train.add_argument("--manifest", required=True)
    train.add_argument("--labels", default=None, help="label vocabulary file")
    train.add_argument("--out", required=True, help="report JSON output path")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--beta", type=float, default=2.0)
    train.add_argument("--delta", type=float, default=0.2)
    train.add_argument("--lambda", dest="lambda_", type=float, default=0.4)
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--batch", type=int, default=32)
    train.add_argument("--epochs", type=int, default=20)
    train.add_argument("--patience", type=int, default=5)
    train.add_argument("--heads", type=int, default=2)
    train.add_argument("--folds", type=int, default=5)
    train.add_argument("--parallel-folds", type=int, default=1)
    train.add_argument("--save-models", default=None,
                       help="directory for per-fold model archives")
    train.set_defaults(handler=_cmd_train)

    evaluate = sub.add_parser("evaluate", help="score a saved model archive on a dataset")
    evaluate.add_argument("--model-file", required=True)
    evaluate.add_argument("--embeddings", required=True)
    evaluate.add_argument("--manifest", required=True)
    evaluate.add_argument("--labels", default=None)
    evaluate.add_argument("--out", default=None, help="optional metrics JSON output path")
    evaluate.set_defaults(handler=_cmd_evaluate)

    gradcheck = sub.add_parser("gradcheck", help="run the 64-bit gradient checking suite")
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--h", type=float, default=None,
                           help="finite-difference step (default: per-check)")
    gradcheck.set_defaults(handler=_cmd_gradcheck)

    synth = sub.add_parser("synth-data", help="write synthetic embedding views with a manifest")
    synth.add_argument("--classes", type=int, required=True)
    synth.add_argument("--per-class", type=int, required=True)
    synth.add_argument("--dims", required=True, help="comma-separated view dimensions (1 or 2)")
    synth.add_argument("--separation", type=float, default=8.0)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="output directory")
    synth.set_defaults(handler=_cmd_synth)

    report = sub.add_parser("report", help="render a report JSON as a table and confusion CSVs")
    report.add_argument("--report", required=True, dest="report_path")
    report.add_argument("--out", required=True, help="directory for confusion CSVs")
    report.add_argument("--labels", default=None, help="label vocabulary for CSV headers")
    report.set_defaults(handler=_cmd_report)

    return parser


def _cmd_train(args: argparse.Namespace) -> int:
    kind = args.model.upper()
    paths = [p for p in args.embeddings.split(",") if p]
    expected = _VIEWS_PER_KIND[kind]
    if len(paths) != expected:
        raise ConfigError(
            f"model {args.model} expects {expected} embedding file(s), got {len(paths)}"
        )
    datasets = [load_dataset(p, args.manifest, args.labels) for p in paths]
    spec = ModelSpec(
        kind=kind,
        input_dims=tuple(ds.dim for ds in datasets),
        num_classes=datasets[0].num_classes,
        heads=args.heads,
    )
    config = TrainConfig(
        lr=args.lr,
        batch_size=args.batch,
        max_epochs=args.epochs,
        patience=args.patience,
        loss=LossConfig(beta=args.beta, delta=args.delta, lambda_=args.lambda_),
        seed=args.seed,
    )

    sink = None
    if args.save_models is not None:
        model_dir = Path(args.save_models)
        model_dir.mkdir(parents=True, exist_ok=True)

        def sink(fold, model):
            save_model(model_dir / f"model_fold{fold}.npz", model)

    report = run_experiment(
        spec,
        datasets,
        config,
        k=args.folds,
        parallel_folds=args.parallel_folds,
        on_fold_trained=sink,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json(), encoding="utf-8")
    log.info(
        "wrote %s: params=%d mean_accuracy=%.4f mean_macro_f1=%.4f",
        out,
        report.folds[0].param_count,
        report.mean_accuracy,
        report.mean_macro_f1,
    )
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    if not Path(args.model_file).exists():
        raise FileNotFoundError(f"model archive not found: {args.model_file}")
    model = load_model(args.model_file)
    paths = [p for p in args.embeddings.split(",") if p]
    if len(paths) != model.spec.num_views:
        raise ConfigError(
            f"saved model expects {model.spec.num_views} view(s), got {len(paths)}"
        )
    datasets = [load_dataset(p, args.manifest, args.labels) for p in paths]
    predictions = model.predict([ds.vectors for ds in datasets])
    accuracy, macro_f1, confusion = compute_metrics(
        datasets[0].labels, predictions, model.spec.num_classes
    )
    payload = {
        "accuracy": accuracy,
        "macro_f1": macro_f1,
        "samples": len(datasets[0]),
        "confusion": confusion.tolist(),
    }
    text = json.dumps(payload, indent=2) + "\n"
    sys.stdout.write(text)
    if args.out is not None:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    checks = standard_suite(seed=args.seed, h=args.h)
    width = max(
        len(f"{name}.{entry.name}") for name, rep in checks for entry in rep.entries
    )
    print(f"{'parameter':<{width}}  {'max_rel_error':>13}  status")
    failed = False
    for name, rep in checks:
        for entry in rep.entries:
            ok = entry.passed(rep.tolerance)
            failed = failed or not ok
            print(
                f"{name + '.' + entry.name:<{width}}  {entry.max_rel_error:13.3e}  "
                f"{'ok' if ok else 'FAIL'}"
            )
        print(
            f"{name:<{width}}  {rep.max_rel_error:13.3e}  "
            f"{'ok' if rep.passed else 'FAIL'} (tolerance {rep.tolerance:g})"
        )
    if failed:
        log.error("gradient check failed")
        return 3
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    dims = [int(d) for d in args.dims.split(",") if d]
    views = synth_generate(
        num_classes=args.classes,
        per_class=args.per_class,
        dims=dims,
        separation=args.separation,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, view in enumerate(views):
        save_dataset(
            view,
            out / f"view{i}.nveb",
            out / "manifest.csv",
            out / "labels.txt",
        )
        log.info("wrote %s (%d x %d)", out / f"view{i}.nveb", len(view), view.dim)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    path = Path(args.report_path)
    if not path.exists():
        raise FileNotFoundError(f"report not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc

    model = payload["model"]
    folds = payload["folds"]
    num_classes = model["num_classes"]
    if args.labels is not None:
        from .data import read_label_vocabulary

        names = read_label_vocabulary(args.labels)
    else:
        names = [f"class_{c}" for c in range(num_classes)]

    dims = ",".join(str(d) for d in model["input_dims"])
    print(
        f"model: {model['kind']}  dims: {dims}  classes: {num_classes}  "
        f"params: {folds[0]['param_count']}"
    )
    print(f"{'fold':>4}  {'A':>7}  {'F1':>7}")
    for f in folds:
        print(f"{f['fold']:>4}  {100 * f['accuracy']:7.2f}  {100 * f['macro_f1']:7.2f}")
    print(f"{'mean':>4}  {100 * payload['mean_accuracy']:7.2f}  {100 * payload['mean_macro_f1']:7.2f}")
    print(f"{'std':>4}  {100 * payload['std_accuracy']:7.2f}  {100 * payload['std_macro_f1']:7.2f}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f in folds:
        csv_path = out / f"confusion_fold{f['fold']}.csv"
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("," + ",".join(names) + "\n")
            for true_name, row in zip(names, f["confusion"]):
                fh.write(true_name + "," + ",".join(str(v) for v in row) + "\n")
        log.info("wrote %s", csv_path)
    return 0


def run_cli(argv: list[str]) -> int:
    """Parse and execute one invocation; returns the process exit code."""
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    _echo_config(args)
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 2
    except DataError as exc:
        log.error("%s", exc)
        return 2
    except (ConfigError, ShapeError, LabelError, StratificationError) as exc:
        log.error("%s", exc)
        return 1
    except NumericError as exc:
        log.error("%s", exc)
        return 3


def main() -> int:
    return run_cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
