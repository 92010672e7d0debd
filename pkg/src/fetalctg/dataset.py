"""CTG dataset ingestion, standardization, correlation and stratified splits."""
from __future__ import annotations

import csv
import enum
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateError, LabelError, ParseError, SchemaError

logger = logging.getLogger(__name__)

# Column order of the public fetal_health.csv, one per cardiotocogram feature.
FEATURE_NAMES = (
    "baseline value",
    "accelerations",
    "fetal_movement",
    "uterine_contractions",
    "light_decelerations",
    "severe_decelerations",
    "prolongued_decelerations",
    "abnormal_short_term_variability",
    "mean_value_of_short_term_variability",
    "percentage_of_time_with_abnormal_long_term_variability",
    "mean_value_of_long_term_variability",
    "histogram_width",
    "histogram_min",
    "histogram_max",
    "histogram_number_of_peaks",
    "histogram_number_of_zeroes",
    "histogram_mode",
    "histogram_mean",
    "histogram_median",
    "histogram_variance",
    "histogram_tendency",
)
LABEL_COLUMN = "fetal_health"
N_FEATURES = len(FEATURE_NAMES)


class ClassLabel(enum.IntEnum):
    NORMAL = 1
    SUSPECT = 2
    PATHOLOGICAL = 3

    @property
    def title(self) -> str:
        return self.name.capitalize()


CLASSES = tuple(ClassLabel)
CLASS_NAMES = tuple(c.title for c in CLASSES)


def _normalize_name(name: str) -> str:
    return re.sub(r"[\s_]+", "_", name.strip().lower())


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (n, 21) float64
    labels: np.ndarray  # (n,) int, values in {1, 2, 3}
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[1] != len(self.feature_names):
            raise SchemaError(f"expected {len(self.feature_names)} feature columns, got shape {x.shape}")
        if y.shape != (x.shape[0],):
            raise SchemaError("labels and features disagree on row count")
        if not np.all(np.isfinite(x)):
            raise SchemaError("features contain non-finite values")
        bad = ~np.isin(y, [int(c) for c in CLASSES])
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise LabelError(f"label {y[row]} at row {row} is not in {{1, 2, 3}}", row=row)
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.feature_names)

    def with_features(self, features) -> "Dataset":
        return Dataset(features, self.labels, self.feature_names)

    def class_counts(self) -> dict:
        return {c: int(np.sum(self.labels == c)) for c in CLASSES}


def load_csv(path) -> Dataset:
    """Read a fetal_health-style CSV.

    Columns are matched by name (case-insensitive, spaces and underscores
    interchangeable) and reordered into ``FEATURE_NAMES`` order.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        keys = [_normalize_name(h) for h in header]
        wanted = [_normalize_name(n) for n in FEATURE_NAMES] + [LABEL_COLUMN]
        missing = [n for n, k in zip(list(FEATURE_NAMES) + [LABEL_COLUMN], wanted) if k not in keys]
        extra = [h for h, k in zip(header, keys) if k not in wanted]
        dupes = sorted({h for h, k in zip(header, keys) if keys.count(k) > 1})
        if missing or extra or dupes:
            raise SchemaError(
                f"{path}: column mismatch; missing={missing} extra={extra} duplicated={dupes}"
            )
        order = [keys.index(k) for k in wanted]

        rows, labels = [], []
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} cells, got {len(record)}", row=lineno)
            values = []
            for col in order:
                cell = record[col].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{lineno}: cannot parse {cell!r} in column {header[col]!r}",
                        row=lineno,
                        column=header[col],
                    ) from None
                if not math.isfinite(value):
                    raise ParseError(f"{path}:{lineno}: non-finite value in column {header[col]!r}",
                                     row=lineno, column=header[col])
                values.append(value)
            label = values.pop()
            if label not in (1.0, 2.0, 3.0):
                raise LabelError(f"{path}:{lineno}: label {record[order[-1]]!r} is not 1, 2 or 3", row=lineno)
            rows.append(values)
            labels.append(int(label))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return Dataset(np.array(rows), np.array(labels))


def stratified_split(d: Dataset, train_fraction: float, seed: int):
    """Per class, put floor(train_fraction * n_c) shuffled rows in train and the rest in test."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in CLASSES:
        members = np.flatnonzero(d.labels == c)
        if members.size == 0:
            continue
        # floor with a small guard so 0.7 * 10 is 7, not 6
        n_train = int(math.floor(train_fraction * members.size + 1e-9))
        if n_train == 0:
            raise DegenerateError(f"class {c.title} gets no training rows at fraction {train_fraction}")
        perm = members[rng.permutation(members.size)]
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return d.subset(train_idx), d.subset(test_idx)


@dataclass(frozen=True)
class Scaler:
    means: np.ndarray
    std_devs: np.ndarray
    constant: np.ndarray  # bool mask of zero-variance columns

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.means.shape[0]:
            raise SchemaError(f"expected {self.means.shape[0]} columns, got {x.shape[-1]}")
        return (x - self.means) / self.std_devs


def fit_scaler(train) -> Scaler:
    """Column means and population standard deviations; constant columns get std 1."""
    x = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty dataset")
    means = x.mean(axis=0)
    std = x.std(axis=0)
    constant = std <= 1e-12 * np.maximum(np.abs(means), 1.0)
    if constant.any():
        logger.warning("zero-variance columns: %s", np.flatnonzero(constant).tolist())
    std = np.where(constant, 1.0, std)
    return Scaler(means, std, constant)


def apply_scaler(s: Scaler, d: Dataset) -> Dataset:
    return d.with_features(s.transform(d.features))


def pearson_correlation(d) -> np.ndarray:
    """Pearson correlation of the feature columns; zero-variance columns get 0 off the diagonal."""
    x = d.features if isinstance(d, Dataset) else np.asarray(d, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("correlation needs at least two rows")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    sd = np.sqrt(np.diag(cov))
    flat = sd <= 1e-12 * np.maximum(np.abs(x.mean(axis=0)), 1.0)
    if flat.any():
        logger.warning("zero-variance columns in correlation: %s", np.flatnonzero(flat).tolist())
    safe = np.where(flat, 1.0, sd)
    corr = cov / np.outer(safe, safe)
    corr[flat, :] = 0.0
    corr[:, flat] = 0.0
    corr = np.clip(0.5 * (corr + corr.T), -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def write_correlation_csv(corr: np.ndarray, path, names=FEATURE_NAMES) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(names))
        for name, row in zip(names, corr):
            w.writerow([name] + [f"{v:.6f}" for v in row])


def write_csv(d: Dataset, path) -> None:
    """Write a dataset in the fetal_health.csv layout."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(d.feature_names) + [LABEL_COLUMN])
        for row, label in zip(d.features, d.labels):
            w.writerow([repr(float(v)) for v in row] + [f"{float(label):.1f}"])
