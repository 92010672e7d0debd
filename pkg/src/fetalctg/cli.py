"""Command line entry point: ``run``, ``correlate`` and ``confusion``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import metrics, runner


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; CLI flags override it")
    p.add_argument("--data", help="fetal_health.csv path (default: $CTG_DATA or ./fetal_health.csv)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key, e.g. --set tabnet.epochs=100")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fetalctg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the model x reducer x train-size grid")
    _common(run)
    run.add_argument("--models", help="comma list from svm,rf,tabnet")
    run.add_argument("--reducers", help="comma list from none,pca,lda")
    run.add_argument("--fractions", help="train fractions, e.g. 0.4,0.5,0.6,0.7,0.8")
    run.add_argument("--seeds", help="comma list of integer seeds")
    run.add_argument("--workers", type=int, help="parallel grid cells (default: all cores)")

    corr = sub.add_parser("correlate", help="write correlation.csv and heatmap.svg")
    _common(corr)

    conf = sub.add_parser("confusion", help="train one cell and write its confusion matrix")
    _common(conf)
    conf.add_argument("--model", default="tabnet", choices=runner.MODELS)
    conf.add_argument("--reducer", default="none", choices=runner.REDUCERS)
    conf.add_argument("--fraction", type=float, default=0.8)
    conf.add_argument("--seed", type=int, default=1)
    return parser


def _settings(args) -> dict:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or "." not in key:
            raise runner.ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    for flag in ("models", "reducers", "fractions", "seeds", "workers", "data", "out"):
        value = getattr(args, flag, None)
        if value is not None:
            out[f"experiment.{flag}"] = value
    return out


def _config(args) -> runner.ExperimentConfig:
    settings = runner.read_config(args.config) if args.config else {}
    if "experiment.data" not in settings and args.data is None and os.environ.get("CTG_DATA"):
        settings["experiment.data"] = os.environ["CTG_DATA"]
    settings.update(_settings(args))
    return runner.apply_settings(runner.ExperimentConfig(), settings).validate()


def cmd_run(cfg: runner.ExperimentConfig) -> int:
    data = ds.load_csv(cfg.data)

    def progress(row):
        status = f"{row.accuracy:6.2f}%" if row.error is None else f"FAILED ({row.error})"
        print(f"  {row.label:<11} train {runner._pct(row.fraction):>3}%  seed {row.seed}: "
              f"{status}  [{row.seconds:.1f}s]", file=sys.stderr)

    print(f"{len(cfg.cells())} cells on {len(data)} rows", file=sys.stderr)
    report = runner.run_experiment(cfg, data, progress=progress)
    manifest = runner.emit_artifacts(report, cfg.out)
    print(runner.accuracy_table(report))
    print()
    for path, size in manifest:
        print(f"{size:>9}  {path}")
    return 2 if report.failed else 0


def cmd_correlate(cfg: runner.ExperimentConfig) -> int:
    data = ds.load_csv(cfg.data)
    for path in runner.write_correlation_artifacts(ds.pearson_correlation(data), data.feature_names,
                                                   Path(cfg.out)):
        print(path)
    return 0


def cmd_confusion(cfg: runner.ExperimentConfig, args) -> int:
    data = ds.load_csv(cfg.data)
    row = runner.run_cell((args.model, args.reducer, args.fraction, args.seed), data, cfg)
    if row.error:
        print(f"cell failed: {row.error}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / runner.confusion_filename(row)
    metrics.write_confusion_csv(row.confusion, path)
    print(f"accuracy {metrics.format_percent(row.accuracy)}%")
    width = max(len(n) for n in ds.CLASS_NAMES) + 2
    print(" " * width + "".join(f"{n:>{width}}" for n in ds.CLASS_NAMES))
    for name, counts in zip(ds.CLASS_NAMES, row.confusion):
        print(f"{name:<{width}}" + "".join(f"{c:>{width}}" for c in counts))
    rec = metrics.recall(row.confusion)
    print("recall  " + "  ".join(f"{n} {r:.4f}" for n, r in zip(ds.CLASS_NAMES, np.nan_to_num(rec))))
    print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "correlate":
            return cmd_correlate(cfg)
        return cmd_confusion(cfg, args)
    except (runner.ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
