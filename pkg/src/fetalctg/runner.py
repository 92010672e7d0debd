"""Train-size sweep over model x reducer x fraction x seed, plus report artifacts."""
from __future__ import annotations

import configparser
import csv
import io
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import dimred, forest, metrics, svm, svgplot, tabnet

logger = logging.getLogger(__name__)

MODELS = ("svm", "rf", "tabnet")
REDUCERS = ("none", "pca", "lda")
DEFAULT_FRACTIONS = (0.4, 0.5, 0.6, 0.7, 0.8)
DEFAULT_SEEDS = (1, 2, 3)
DEFAULT_DATA = "fetal_health.csv"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SvmOptions:
    kernel: str = "rbf"
    c: float = 1.0
    gamma: float | None = None  # None = scale heuristic
    tol: float = 1e-3


@dataclass(frozen=True)
class ForestOptions:
    trees: int = 200
    max_features: int | None = None  # None = ceil(sqrt(n_features))
    max_depth: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    data: str = DEFAULT_DATA
    fractions: tuple = DEFAULT_FRACTIONS
    models: tuple = MODELS
    reducers: tuple = ("pca", "lda")
    seeds: tuple = DEFAULT_SEEDS
    out: str = "results"
    workers: int = 0  # 0 = os.cpu_count()
    pca_components: float | int = dimred.DEFAULT_PCA_VARIANCE
    lda_components: int = dimred.DEFAULT_LDA_COMPONENTS
    svm: SvmOptions = field(default_factory=SvmOptions)
    rf: ForestOptions = field(default_factory=ForestOptions)
    tabnet: tabnet.TabNetConfig = field(default_factory=tabnet.TabNetConfig)

    def validate(self) -> "ExperimentConfig":
        if not self.models:
            raise ConfigError("at least one model is required")
        unknown = [m for m in self.models if m not in MODELS]
        if unknown:
            raise ConfigError(f"unknown models {unknown}; choose from {MODELS}")
        unknown = [r for r in self.reducers if r not in REDUCERS]
        if unknown:
            raise ConfigError(f"unknown reducers {unknown}; choose from {REDUCERS}")
        if any(m != "tabnet" for m in self.models) and not self.reducers:
            raise ConfigError("at least one reducer is required for svm/rf")
        if not self.fractions or any(not 0.0 < f < 1.0 for f in self.fractions):
            raise ConfigError(f"train fractions must lie in (0, 1): {self.fractions}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        return self

    def cells(self):
        """(model, reducer, fraction, seed) in report order; tabnet always uses raw features."""
        out = []
        for model in sorted(set(self.models), key=MODELS.index):
            reducers = ("none",) if model == "tabnet" else sorted(set(self.reducers), key=REDUCERS.index)
            for reducer in reducers:
                for fraction in sorted(set(self.fractions)):
                    for seed in sorted(set(self.seeds)):
                        out.append((model, reducer, fraction, seed))
        return out


# --------------------------------------------------------------------------
# config file: INI with an [experiment] section and one section per model


def _split_list(text, cast=str):
    return tuple(cast(v.strip()) for v in str(text).split(",") if v.strip())


def _number(text):
    text = str(text).strip()
    if text.lower() in ("none", "auto", "scale", ""):
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def _coerce(dc, key, raw):
    names = {f.name: f for f in fields(dc)}
    if key not in names:
        raise ConfigError(f"unknown option {key!r} for {type(dc).__name__}")
    current = getattr(dc, key)
    if isinstance(current, str):
        return str(raw)
    value = _number(raw)
    if isinstance(current, int) and not isinstance(current, bool) and isinstance(value, float):
        raise ConfigError(f"{key} expects an integer, got {raw!r}")
    if isinstance(current, float) and isinstance(value, int):
        value = float(value)
    return value


def apply_settings(cfg: ExperimentConfig, settings: dict) -> ExperimentConfig:
    """Apply ``{"section.key": value}`` overrides (section "experiment" for top-level keys)."""
    top, sections = {}, {"svm": {}, "rf": {}, "tabnet": {}}
    for dotted, raw in settings.items():
        section, _, key = dotted.partition(".")
        key = key.replace("-", "_")
        if section == "experiment":
            if key in ("fractions",):
                top[key] = _split_list(raw, float)
            elif key in ("seeds",):
                top[key] = _split_list(raw, int)
            elif key in ("models", "reducers"):
                top[key] = _split_list(raw)
            elif key in ("data", "out"):
                top[key] = str(raw)
            elif key == "workers":
                top[key] = int(raw)
            else:
                raise ConfigError(f"unknown experiment option {key!r}")
        elif section == "pca" and key == "components":
            value = _number(raw)
            top["pca_components"] = dimred.DEFAULT_PCA_VARIANCE if value is None else value
        elif section == "lda" and key == "components":
            top["lda_components"] = int(raw)
        elif section in sections:
            sections[section][key] = _coerce(getattr(cfg, section), key, raw)
        else:
            raise ConfigError(f"unknown config section {section!r}")
    cfg = replace(cfg, **top)
    for name, values in sections.items():
        if values:
            cfg = replace(cfg, **{name: replace(getattr(cfg, name), **values)})
    return cfg


def read_config(path) -> dict:
    parser = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return {f"{section}.{key}": value for section in parser.sections()
            for key, value in parser.items(section)}


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    settings = read_config(path) if path else {}
    settings.update(overrides or {})
    return apply_settings(ExperimentConfig(), settings).validate()


# --------------------------------------------------------------------------
# running


@dataclass
class CellResult:
    model: str
    reducer: str
    fraction: float
    seed: int
    accuracy: float | None = None
    seconds: float = 0.0
    confusion: np.ndarray | None = None
    error: str | None = None

    @property
    def label(self) -> str:
        return self.model if self.reducer == "none" else f"{self.model}-{self.reducer}"

    @property
    def key(self):
        return (MODELS.index(self.model), REDUCERS.index(self.reducer), self.fraction, self.seed)


@dataclass
class ExperimentReport:
    rows: list
    correlation: np.ndarray | None = None
    feature_names: tuple = ds.FEATURE_NAMES
    correlation_path: str | None = None

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r.error]

    def mean_accuracy(self, model, reducer, fraction) -> float | None:
        accs = [r.accuracy for r in self.rows if (r.model, r.reducer, r.fraction) == (model, reducer, fraction)
                and r.accuracy is not None]
        return float(np.mean(accs)) if accs else None

    def find(self, model, reducer, fraction, seed) -> CellResult | None:
        for r in self.rows:
            if (r.model, r.reducer, r.fraction, r.seed) == (model, reducer, fraction, seed):
                return r
        return None


def fit_predict(model: str, reducer: str, train: ds.Dataset, test: ds.Dataset, seed: int,
                cfg: ExperimentConfig) -> np.ndarray:
    """Standardize on train, optionally reduce, fit ``model`` and predict the test labels."""
    scaler = ds.fit_scaler(train)
    x_train = scaler.transform(train.features)
    x_test = scaler.transform(test.features)
    if reducer != "none":
        proj = dimred.fit_reducer(reducer, x_train, train.labels,
                                  pca_components=cfg.pca_components, lda_components=cfg.lda_components)
        x_train, x_test = dimred.project(proj, x_train), dimred.project(proj, x_test)
    if model == "svm":
        o = cfg.svm
        kernel = svm.KernelSpec(o.kernel, o.gamma if o.kernel == "rbf" else None)
        fitted = svm.svm_fit(x_train, train.labels, kernel, c=o.c, tol=o.tol)
        return fitted.predict(x_test)
    if model == "rf":
        o = cfg.rf
        max_features = o.max_features
        if max_features is not None:
            max_features = min(max_features, x_train.shape[1])
        fitted = forest.forest_fit(x_train, train.labels, trees=o.trees, max_features=max_features,
                                   seed=seed, max_depth=o.max_depth)
        return fitted.predict(x_test)
    if model == "tabnet":
        params, _ = tabnet.tabnet_fit(x_train, train.labels, replace(cfg.tabnet, seed=seed))
        return tabnet.tabnet_predict(params, cfg.tabnet, x_test)
    raise ConfigError(f"unknown model {model!r}")


def run_cell(cell, data: ds.Dataset, cfg: ExperimentConfig) -> CellResult:
    model, reducer, fraction, seed = cell
    result = CellResult(model, reducer, fraction, seed)
    start = time.perf_counter()
    try:
        train, test = ds.stratified_split(data, fraction, seed)
        pred = fit_predict(model, reducer, train, test, seed, cfg)
        result.confusion = metrics.confusion(test.labels, pred)
        result.accuracy = metrics.accuracy(result.confusion)
    except Exception as exc:  # a failed cell is reported, the sweep continues
        logger.exception("cell %s failed", cell)
        result.error = f"{type(exc).__name__}: {exc}"
    result.seconds = time.perf_counter() - start
    return result


def _resolve_workers(workers: int) -> int:
    return workers if workers and workers > 0 else (os.cpu_count() or 1)


def run_experiment(cfg: ExperimentConfig, data: ds.Dataset | None = None, progress=None) -> ExperimentReport:
    cfg.validate()
    data = data if data is not None else ds.load_csv(cfg.data)
    cells = cfg.cells()
    workers = min(_resolve_workers(cfg.workers), len(cells))
    rows = []
    if workers <= 1:
        for cell in cells:
            rows.append(run_cell(cell, data, cfg))
            if progress:
                progress(rows[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, cell, data, cfg) for cell in cells]
            for fut in futures:
                rows.append(fut.result())
                if progress:
                    progress(rows[-1])
    rows.sort(key=lambda r: r.key)
    return ExperimentReport(rows, ds.pearson_correlation(data), data.feature_names)


# --------------------------------------------------------------------------
# artifacts


def _pct(fraction: float) -> str:
    return f"{round(fraction * 100, 6):g}"


def confusion_filename(row: CellResult) -> str:
    return f"confusion_{row.label}_{_pct(row.fraction)}_seed{row.seed}.csv"


def results_csv_text(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "reducer", "train_size_pct", "seed", "accuracy", "mean_accuracy", "error"])
    for r in report.rows:
        mean = report.mean_accuracy(r.model, r.reducer, r.fraction)
        w.writerow([r.model, r.reducer, _pct(r.fraction), r.seed,
                    "" if r.accuracy is None else metrics.format_percent(r.accuracy),
                    "" if mean is None else metrics.format_percent(mean),
                    r.error or ""])
    return buf.getvalue()


def accuracy_table(report: ExperimentReport) -> str:
    """Seed-mean accuracies as a text table with one line per model/reducer."""
    fractions = sorted({r.fraction for r in report.rows})
    labels = []
    for r in report.rows:
        if (r.model, r.reducer) not in labels:
            labels.append((r.model, r.reducer))
    lines = ["model".ljust(14) + "".join(f"{_pct(f) + '%':>9}" for f in fractions)]
    for model, reducer in labels:
        cells = []
        for f in fractions:
            m = report.mean_accuracy(model, reducer, f)
            cells.append(f"{metrics.format_percent(m) if m is not None else '-':>9}")
        name = model if reducer == "none" else f"{model}+{reducer}"
        lines.append(name.ljust(14) + "".join(cells))
    return "\n".join(lines)


def _check_writable(out: Path) -> None:
    try:
        out.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=out, prefix=".probe-"):
            pass
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def write_correlation_artifacts(corr, names, out: Path) -> list:
    out = Path(out)
    _check_writable(out)
    ds.write_correlation_csv(corr, out / "correlation.csv", names)
    (out / "heatmap.svg").write_text(svgplot.heatmap_svg(corr, list(names)), encoding="utf-8")
    return [out / "correlation.csv", out / "heatmap.svg"]


def emit_artifacts(report: ExperimentReport, out) -> list:
    """Write results, confusion matrices, correlation and charts; returns [(path, bytes)]."""
    if not report.rows:
        raise ValueError("empty report")
    out = Path(out)
    _check_writable(out)
    written = []
    results = out / "results.csv"
    results.write_text(results_csv_text(report), encoding="utf-8")
    written.append(results)
    for r in report.rows:
        if r.confusion is not None:
            path = out / confusion_filename(r)
            metrics.write_confusion_csv(r.confusion, path)
            written.append(path)
    if report.correlation is not None:
        written += write_correlation_artifacts(report.correlation, report.feature_names, out)
        report.correlation_path = str(out / "correlation.csv")

    fractions = sorted({r.fraction for r in report.rows})
    series = []
    for r in report.rows:
        if (r.model, r.reducer) not in series:
            series.append((r.model, r.reducer))
    values = [[report.mean_accuracy(m, red, f) for f in fractions] for m, red in series]
    names = [m.upper() if red == "none" else f"{m.upper()}+{red.upper()}" for m, red in series]
    svg = svgplot.grouped_bars_svg([f"{_pct(f)}%" for f in fractions], names, values,
                                   title="Accuracy vs train size")
    bars = out / "accuracy_bars.svg"
    bars.write_text(svg, encoding="utf-8")
    written.append(bars)
    return [(str(p), p.stat().st_size) for p in written]
