"""Datasets: CSV ingestion, standardization, bundled data and synthetic clusters."""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from typing import Optional, Sequence

import numpy as np

BUNDLED = {
    # name: (file, label column, number of clusters)
    "zoo": ("zoo.csv", "type", 7),
    "ecoli": ("ecoli.csv", "class", 8),
}


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray
    min: np.ndarray
    max: np.ndarray

    def fill_values(self, mode: str) -> np.ndarray:
        if mode == "zero":
            return np.zeros_like(self.mean)
        if mode in ("mean", "min", "max"):
            return getattr(self, mode).copy()
        raise ValueError(f"unknown fill mode {mode!r}; expected mean, min, max or zero")


@dataclass(frozen=True)
class Dataset:
    """An n x d point matrix with optional integer ground-truth labels.

    ``standardization`` holds ``(mean, scale)`` when the points were
    standardized, so that raw inputs can be mapped the same way later.
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    feature_names: Optional[Sequence[str]] = None
    label_names: Optional[Sequence[str]] = None
    standardization: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise ValueError(f"points must be a non-empty n x d matrix, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("points contain non-finite values")
        object.__setattr__(self, "points", points)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != points.shape[0]:
                raise ValueError("labels must have one entry per point")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @cached_property
    def feature_stats(self) -> FeatureStats:
        return FeatureStats(self.points.mean(axis=0), self.points.min(axis=0), self.points.max(axis=0))

    def fingerprint(self) -> str:
        """SHA-256 of the point matrix bytes."""
        return hashlib.sha256(np.ascontiguousarray(self.points).tobytes()).hexdigest()

    def apply_standardization(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.standardization is None:
            return X
        mean, scale = self.standardization
        return (X - mean) / scale


def as_dataset(data) -> Dataset:
    return data if isinstance(data, Dataset) else Dataset(np.asarray(data, dtype=np.float64))


def _factorize(values):
    names = list(dict.fromkeys(values))
    try:
        # integer-coded labels keep their numeric order
        order = sorted(names, key=lambda s: float(s))
    except ValueError:
        order = names
    index = {name: i for i, name in enumerate(order)}
    return np.array([index[v] for v in values], dtype=np.int64), order


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=None) -> Dataset:
    """Read a rectangular numeric CSV.

    The header row is optional (detected when any cell is non-numeric).
    ``label_column`` may be a column name, an integer index (negative counts
    from the end) or None.  Labels are factorized to ``0 .. c-1``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = None
    if not all(_is_number(cell) for i, cell in enumerate(rows[0]) if not _label_index_matches(i, label_column, len(rows[0]))):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: ragged row ({len(row)} cells, expected {width})")

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise ValueError(f"{path}: label column {label_column!r} not found")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column) % width
    feature_idx = [i for i in range(width) if i != label_idx]
    if not feature_idx:
        raise ValueError(f"{path}: no feature columns")

    points = np.empty((len(rows), len(feature_idx)))
    for r, row in enumerate(rows):
        for c, i in enumerate(feature_idx):
            try:
                points[r, c] = float(row[i])
            except ValueError:
                raise ValueError(f"{path}: non-numeric feature cell {row[i]!r} in row {r + 1}, column {i + 1}") from None
    labels = label_names = None
    if label_idx is not None:
        labels, label_names = _factorize([row[label_idx].strip() for row in rows])
    names = [header[i] for i in feature_idx] if header else None
    return Dataset(points, labels, names, label_names)


def _label_index_matches(i, label_column, width):
    if label_column is None:
        return False
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.lstrip("-").isdigit()):
        return i == int(label_column) % width
    return False


def standardize(data: Dataset) -> Dataset:
    """Zero-mean, unit-variance features; constant features are only centered."""
    data = as_dataset(data)
    if data.n < 2:
        raise ValueError("standardization needs at least two points")
    mean = data.points.mean(axis=0)
    scale = data.points.std(axis=0)
    # decide constancy by range: the float mean of a constant column can be off by an ulp
    const = np.ptp(data.points, axis=0) == 0
    mean = np.where(const, data.points[0], mean)
    scale = np.where(const | (scale == 0), 1.0, scale)
    points = (data.points - mean) / scale
    if data.standardization is not None:
        # compose with an earlier transform so raw inputs still map correctly
        mean0, scale0 = data.standardization
        mean, scale = mean0 + mean * scale0, scale0 * scale
    return replace(data, points=points, standardization=(mean, scale))


def load_bundled(name: str, standardized: bool = True) -> Dataset:
    """Load one of the bundled UCI datasets (``zoo`` or ``ecoli``)."""
    try:
        filename, label_column, _ = BUNDLED[name]
    except KeyError:
        raise ValueError(f"unknown bundled dataset {name!r}; choose from {sorted(BUNDLED)}") from None
    with resources.as_file(resources.files("clam") / "data" / filename) as path:
        data = load_csv(path, label_column=label_column)
    return standardize(data) if standardized else data


def bundled_path(name: str) -> str:
    filename = BUNDLED[name][0]
    return str(resources.files("clam") / "data" / filename)


def gen_elongated(n_per_cluster: int = 500, n_clusters: int = 2, seed: int = 0,
                  long_sd: float = 3.0, short_sd: float = 0.3, spacing: float = 3.0,
                  stagger: float = 1.5) -> Dataset:
    """Axis-aligned elongated Gaussian clusters placed side by side.

    Each cluster is stretched along y (``long_sd``) and thin along x
    (``short_sd``).  Centers sit ``spacing`` apart on the x axis and are
    shifted vertically by ``stagger`` per step, so cluster ``c`` is centered
    at ``((c - m) * spacing, (c - m) * 2 * stagger / (n_clusters - 1))`` with
    ``m`` the middle index.  With the defaults the k-means optimum cuts across
    the stripes, while knowing one coordinate still says something about the
    other (the stagger), which a pattern-completion objective can use.
    """
    if n_clusters not in (2, 3):
        raise ValueError("n_clusters must be 2 or 3")
    if int(n_per_cluster) != n_per_cluster or n_per_cluster < 1:
        raise ValueError("n_per_cluster must be a positive integer")
    if short_sd <= 0 or long_sd < np.sqrt(8) * short_sd:
        raise ValueError("need long_sd / short_sd >= sqrt(8) for an 8:1 covariance ratio")
    rng = np.random.default_rng(seed)
    offsets = np.arange(n_clusters) - (n_clusters - 1) / 2
    centers = np.column_stack([offsets * spacing, offsets * 2.0 * stagger / (n_clusters - 1)])
    blocks, labels = [], []
    for c, center in enumerate(centers):
        blocks.append(rng.standard_normal((int(n_per_cluster), 2)) * np.array([short_sd, long_sd]) + center)
        labels.append(np.full(int(n_per_cluster), c))
    return Dataset(np.vstack(blocks), np.concatenate(labels), ["x", "y"], [str(c) for c in range(n_clusters)])


def write_csv(path, points, labels=None, header=None, label_header="label"):
    points = np.asarray(points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(list(header) + ([label_header] if labels is not None else []))
        for i, row in enumerate(points):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            writer.writerow(cells)
