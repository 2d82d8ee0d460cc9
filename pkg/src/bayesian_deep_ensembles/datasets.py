"""Synthetic generators, delimited-file ingestion, splitting and normalization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetParseError, DomainError, ShapeError


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    truth: np.ndarray | None = None
    tag: str = ""

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ShapeError(f"inputs {x.shape} and targets {y.shape} disagree")
        if x.shape[0] < 1:
            raise DomainError("a dataset needs at least one row")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("dataset contains non-finite entries")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)
        if self.truth is not None:
            t = np.asarray(self.truth, dtype=np.float64)
            if t.ndim == 1:
                t = t[:, None]
            if t.shape != y.shape:
                raise ShapeError(f"ground truth shape {t.shape} != targets {y.shape}")
            object.__setattr__(self, "truth", t)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def p_x(self) -> int:
        return self.inputs.shape[1]

    @property
    def p_y(self) -> int:
        return self.targets.shape[1]

    def subset(self, idx, tag: str | None = None) -> Dataset:
        return Dataset(
            self.inputs[idx],
            self.targets[idx],
            None if self.truth is None else self.truth[idx],
            self.tag if tag is None else tag,
        )

    def without_truth(self) -> Dataset:
        return replace(self, truth=None)


def quartic_1d(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * ((4.5 * x) ** 4 - (18.0 * x) ** 2 + 22.5 * x)


def quartic_2d(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sum((1.5 * x - 1.0) ** 2 * (1.3 * x + 1.0) ** 2, axis=-1)


def _rng(seed, tag):
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def gen_quartic_1d(n: int, seed: int, noise_std: float = 10.0) -> Dataset:
    """Uniform inputs on [-1, 1], quartic regression function plus Gaussian noise."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = _rng(seed, 1)
    x = rng.uniform(-1.0, 1.0, size=(n, 1))
    truth = quartic_1d(x)
    y = truth + noise_std * rng.standard_normal((n, 1))
    return Dataset(x, y, truth, "quartic1d")


def gen_quartic_2d(n: int, seed: int, noise_std: float = 0.2) -> Dataset:
    """Uniform inputs on [-1, 1]^2, separable quartic plus Gaussian noise."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = _rng(seed, 2)
    x = rng.uniform(-1.0, 1.0, size=(n, 2))
    truth = quartic_2d(x)[:, None]
    y = truth + noise_std * rng.standard_normal((n, 1))
    return Dataset(x, y, truth, "quartic2d")


def load_delimited(path, target_column: int = -1, delimiter: str | None = ",",
                   header: bool = False, tag: str | None = None) -> Dataset:
    """Read a numeric table with one sample per row.

    ``delimiter=None`` splits on runs of whitespace. ``target_column`` may be
    negative. Row numbers in error messages are 1-based file lines.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"data file not found: {path}")
    rows = []
    with path.open(newline="") as fh:
        if delimiter is None:
            lines = (line.split() for line in fh)
        else:
            lines = csv.reader(fh, delimiter=delimiter)
        for lineno, cells in enumerate(lines, start=1):
            if header and lineno == 1:
                continue
            cells = [c.strip() for c in cells]
            if not cells or all(c == "" for c in cells):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                col = next(j for j, c in enumerate(cells) if not _is_float(c))
                raise DatasetParseError(
                    f"{path}: row {lineno}, column {col + 1}: non-numeric cell {cells[col]!r}"
                ) from None
            if rows and len(values) != len(rows[0][1]):
                raise DatasetParseError(
                    f"{path}: row {lineno} has {len(values)} cells, expected {len(rows[0][1])}"
                )
            rows.append((lineno, values))
    if not rows:
        raise DatasetParseError(f"{path}: no data rows")
    table = np.array([v for _, v in rows], dtype=np.float64)
    ncol = table.shape[1]
    if ncol < 2:
        raise DatasetParseError(f"{path}: need at least two columns, found {ncol}")
    if not -ncol <= target_column < ncol:
        raise ConfigError(f"target column {target_column} out of range for {ncol} columns")
    tcol = target_column % ncol
    x = np.delete(table, tcol, axis=1)
    y = table[:, tcol : tcol + 1]
    return Dataset(x, y, None, tag or path.stem)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def split(data: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint train/test partition; train size is ``round(fraction * N)``."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train fraction must lie in (0, 1), got {train_fraction}")
    n = len(data)
    n_train = int(round(train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise ConfigError(f"fraction {train_fraction} leaves an empty side for N={n}")
    perm = _rng(seed, 3).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return data.subset(train_idx, "train"), data.subset(test_idx, "test")


@dataclass(frozen=True)
class NormStats:
    y_mean: np.ndarray
    y_std: np.ndarray
    x_mean: np.ndarray | None = None
    x_std: np.ndarray | None = None

    def apply(self, data: Dataset) -> Dataset:
        x = data.inputs if self.x_mean is None else (data.inputs - self.x_mean) / self.x_std
        y = (data.targets - self.y_mean) / self.y_std
        t = None if data.truth is None else (data.truth - self.y_mean) / self.y_std
        return Dataset(x, y, t, data.tag)

    def inverse_targets(self, y):
        return np.asarray(y) * self.y_std + self.y_mean

    def inverse_inputs(self, x):
        if self.x_mean is None:
            return np.asarray(x)
        return np.asarray(x) * self.x_std + self.x_mean

    def to_dict(self) -> dict:
        def lst(a):
            return None if a is None else a.tolist()

        return {"y_mean": lst(self.y_mean), "y_std": lst(self.y_std),
                "x_mean": lst(self.x_mean), "x_std": lst(self.x_std)}

    @classmethod
    def from_dict(cls, d: dict) -> NormStats:
        def arr(v):
            return None if v is None else np.array(v, dtype=np.float64)

        return cls(arr(d["y_mean"]), arr(d["y_std"]), arr(d.get("x_mean")), arr(d.get("x_std")))


def _column_stats(a: np.ndarray, what: str):
    mean = a.mean(axis=0)
    std = a.std(axis=0)
    bad = np.flatnonzero(~(std > 0))
    if bad.size:
        raise DomainError(f"zero-variance {what} column {int(bad[0])}")
    return mean, std


def normalize(train: Dataset, test: Dataset | None = None, inputs: bool = False):
    """Standardize with statistics from ``train`` only.

    Targets are always standardized; inputs only when ``inputs`` is set.
    Returns ``(train', test', stats)``; ``test'`` is None when no test set is given.
    """
    y_mean, y_std = _column_stats(train.targets, "target")
    x_mean = x_std = None
    if inputs:
        x_mean, x_std = _column_stats(train.inputs, "input")
    stats = NormStats(y_mean, y_std, x_mean, x_std)
    return stats.apply(train), None if test is None else stats.apply(test), stats
