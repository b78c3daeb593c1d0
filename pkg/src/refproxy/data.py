"""Dataset container, CSV ingestion, reproducible splits and synthetic generators."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

REGRESSION = "regression"
CLASSIFICATION = "classification"
TASKS = (REGRESSION, CLASSIFICATION)

_MISSING = {"", "na", "nan", "null", "none", "?"}


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix plus target.

    Classification targets are integer labels in ``1..n_classes``; the
    original label strings are kept in ``label_mapping``.
    """

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    task: str = REGRESSION
    target_name: str = "y"
    n_classes: int = 0
    label_mapping: dict[str, int] | None = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        if X.ndim != 2:
            raise DataError("features must be a 2-d array")
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        y = np.array(self.target, dtype=int if self.task == CLASSIFICATION else float)
        if y.shape != (X.shape[0],):
            raise DataError("target length does not match feature rows")
        if len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match feature columns")
        if not np.all(np.isfinite(X)) or (self.task == REGRESSION and not np.all(np.isfinite(y))):
            raise DataError("non-finite values are not allowed")
        if self.task == CLASSIFICATION:
            if self.n_classes < 2:
                raise DataError("classification needs n_classes >= 2")
            if y.size and (y.min() < 1 or y.max() > self.n_classes):
                raise DataError(f"labels must lie in 1..{self.n_classes}")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "target", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @cached_property
    def feature_ranges(self) -> np.ndarray:
        """(d, 2) array of per-feature (min, max)."""
        if self.n == 0:
            return np.zeros((self.d, 2))
        return np.column_stack([self.features.min(axis=0), self.features.max(axis=0)])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            self.features[idx],
            self.target[idx],
            self.feature_names,
            task=self.task,
            target_name=self.target_name,
            n_classes=self.n_classes,
            label_mapping=self.label_mapping,
        )


def from_arrays(features, target, task=REGRESSION, feature_names=None, target_name="y") -> Dataset:
    """Build a validated Dataset from in-memory arrays.

    Classification targets may be arbitrary hashable labels; they are mapped
    to ``1..K`` in order of first appearance.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError("need at least one row and one feature")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{k}" for k in range(X.shape[1]))
    if task == CLASSIFICATION:
        labels, mapping = _map_labels([str(v) for v in np.asarray(target).tolist()])
        return Dataset(X, labels, names, task=task, target_name=target_name,
                       n_classes=len(mapping), label_mapping=mapping)
    return Dataset(X, np.asarray(target, dtype=float), names, task=task, target_name=target_name)


def _map_labels(raw: list[str]) -> tuple[np.ndarray, dict[str, int]]:
    mapping: dict[str, int] = {}
    for v in raw:
        if v not in mapping:
            mapping[v] = len(mapping) + 1
    if len(mapping) < 2:
        raise DataError("classification target has a single class")
    return np.array([mapping[v] for v in raw], dtype=int), mapping


def load_csv(path, target_column: str, task: str = REGRESSION) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    if task not in TASKS:
        raise DataError(f"unknown task {task!r}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if target_column not in header:
            raise DataError(f"unknown target column {target_column!r}; columns are {header}")
        t_col = header.index(target_column)
        f_cols = [j for j in range(len(header)) if j != t_col]
        rows, raw_target = [], []
        for r, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"row {r}: expected {len(header)} cells, got {len(row)}")
            for j, cell in enumerate(row):
                if cell.strip().lower() in _MISSING:
                    raise DataError(f"missing value at row {r}, column {header[j]!r}")
            vals = []
            for j in f_cols:
                try:
                    vals.append(float(row[j]))
                except ValueError:
                    raise DataError(f"non-numeric value {row[j]!r} at row {r}, column {header[j]!r}") from None
            rows.append(vals)
            raw_target.append(row[t_col].strip())
    if not rows:
        raise DataError(f"{path}: no data rows")
    X = np.array(rows, dtype=float)
    names = [header[j] for j in f_cols]
    if task == CLASSIFICATION:
        labels, mapping = _map_labels(raw_target)
        return Dataset(X, labels, names, task=task, target_name=target_column,
                       n_classes=len(mapping), label_mapping=mapping)
    try:
        y = np.array([float(v) for v in raw_target])
    except ValueError as exc:
        raise DataError(f"non-numeric regression target in column {target_column!r}: {exc}") from None
    return Dataset(X, y, names, task=task, target_name=target_column)


def write_csv(ds: Dataset, path) -> None:
    """Write a dataset so that ``load_csv`` reproduces it bit-for-bit."""
    inverse = {v: k for k, v in (ds.label_mapping or {}).items()}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.feature_names) + [ds.target_name])
        for x, t in zip(ds.features, ds.target):
            label = inverse.get(int(t), str(int(t))) if ds.task == CLASSIFICATION else repr(float(t))
            w.writerow([repr(float(v)) for v in x] + [label])


def write_label_mapping(ds: Dataset, path) -> None:
    Path(path).write_text(json.dumps(ds.label_mapping or {}, sort_keys=True) + "\n")


def load_bundled(name: str) -> Dataset:
    """Load one of the small datasets shipped with the package.

    ``diabetes`` (442 x 10, regression) and ``wine`` (178 x 13, 3 classes).
    """
    targets = {"diabetes": ("progression", REGRESSION), "wine": ("cultivar", CLASSIFICATION)}
    if name not in targets:
        raise DataError(f"unknown bundled dataset {name!r}; choose from {sorted(targets)}")
    column, task = targets[name]
    ref = resources.files("refproxy") / "datasets" / f"{name}.csv"
    with resources.as_file(ref) as p:
        return load_csv(p, column, task)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise DataError("train_fraction must lie in (0, 1]")
        if self.seed < 0:
            raise DataError("seed must be non-negative")


def split_indices(n: int, how: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    n_train = min(n, math.ceil(how.train_fraction * n - 1e-9))
    perm = np.random.default_rng(how.seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split(ds: Dataset, how: SplitSpec, require_both: bool = False) -> tuple[Dataset, Dataset]:
    train_idx, test_idx = split_indices(ds.n, how)
    if require_both and (train_idx.size == 0 or test_idx.size == 0):
        raise DataError(f"train_fraction={how.train_fraction} leaves an empty partition of {ds.n} rows")
    return ds.subset(train_idx), ds.subset(test_idx)


def smooth_truth(x):
    """Smooth, strictly increasing curve used by :func:`synth_smooth_1d`."""
    return 2.0 / (1.0 + np.exp(-3.0 * np.asarray(x, dtype=float)))


SMOOTH_DOMAIN = (-2.0, 2.0)


def synth_smooth_1d(n: int, noise_sd: float, seed: int) -> tuple[Dataset, Callable]:
    """Noisy samples of a sigmoid-shaped increasing function on [-2, 2].

    Returns the dataset and the noiseless truth function.
    """
    if n < 2:
        raise DataError("n must be >= 2")
    if noise_sd < 0:
        raise DataError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    x = rng.uniform(*SMOOTH_DOMAIN, size=n)
    y = smooth_truth(x) + noise_sd * rng.standard_normal(n)
    return Dataset(x[:, None], y, ("x",)), smooth_truth
