"""Datasets: synthetic generators, delimited-text I/O, scaling, splits.

Labels are binary with 1 marking anomalies.  Training splits contain normal
rows only; scalers are always fit on the training split so nothing leaks
from test rows.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ShapeError

SYNTHETIC_KINDS = ("gaussian-mixture", "ring", "two-moons")

RING_RADIUS = 1.0
RING_NOISE = 0.05
RING_ANOMALY_STD = 0.2
MOON_NOISE = 0.06
MOON_ANOMALY_BOX = ((-1.25, 2.25), (-1.0, 1.5))
MOON_ANOMALY_MARGIN = 0.3
MIXTURE_CENTER_RADIUS = 2.0
MIXTURE_STD = 0.25
MIXTURE_ANOMALY_BOX = 3.5
EXTRA_DIM_STD = 0.05


@dataclass
class LabeledDataset:
    rows: np.ndarray
    labels: np.ndarray
    feature_names: list = None

    def __post_init__(self):
        self.rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.rows.ndim != 2:
            raise DataError(f"rows must be 2-D, got shape {self.rows.shape}")
        if self.labels.shape != (self.rows.shape[0],):
            raise DataError("labels length must match the row count")
        if not np.all(np.isfinite(self.rows)):
            raise DataError("dataset contains non-finite entries")
        if self.labels.size and not np.all(np.isin(self.labels, (0, 1))):
            raise DataError("labels must be binary (1 marks anomalies)")
        if self.feature_names is not None and len(self.feature_names) != self.rows.shape[1]:
            raise DataError("feature_names length must match the width")

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def width(self):
        return self.rows.shape[1]

    def subset(self, idx):
        names = list(self.feature_names) if self.feature_names else None
        return LabeledDataset(self.rows[idx], self.labels[idx], names)


def _with_extra_dims(xy, d, rng):
    if d == 2:
        return xy
    extra = rng.normal(0.0, EXTRA_DIM_STD, size=(xy.shape[0], d - 2))
    return np.hstack([xy, extra])


def _ring(n_normal, n_anomaly, d, rng):
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n_normal)
    radius = RING_RADIUS + rng.normal(0.0, RING_NOISE, size=n_normal)
    normal = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    anomaly = rng.normal(0.0, RING_ANOMALY_STD, size=(n_anomaly, 2))
    return normal, anomaly


def _moon_curves(resolution=256):
    t = np.linspace(0.0, np.pi, resolution)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    return np.vstack([upper, lower])


def _two_moons(n_normal, n_anomaly, d, rng):
    upper = rng.integers(0, 2, size=n_normal).astype(bool)
    t = rng.uniform(0.0, np.pi, size=n_normal)
    x = np.where(upper, np.cos(t), 1.0 - np.cos(t))
    y = np.where(upper, np.sin(t), 0.5 - np.sin(t))
    normal = np.column_stack([x, y]) + rng.normal(0.0, MOON_NOISE, size=(n_normal, 2))
    # Background anomalies: uniform over the bounding box, rejecting anything
    # within MOON_ANOMALY_MARGIN of either arc so they sit off the manifold.
    curves = _moon_curves()
    (x_lo, x_hi), (y_lo, y_hi) = MOON_ANOMALY_BOX
    accepted = []
    while len(accepted) < n_anomaly:
        draw = rng.uniform((x_lo, y_lo), (x_hi, y_hi), size=(max(4 * n_anomaly, 16), 2))
        dists = np.min(
            np.linalg.norm(draw[:, None, :] - curves[None, :, :], axis=2), axis=1
        )
        accepted.extend(draw[dists > MOON_ANOMALY_MARGIN])
    anomaly = np.asarray(accepted[:n_anomaly], dtype=np.float64).reshape(n_anomaly, 2)
    return normal, anomaly


def _gaussian_mixture(n_normal, n_anomaly, d, rng):
    angles = 2.0 * np.pi * np.arange(3) / 3.0
    centers = MIXTURE_CENTER_RADIUS * np.column_stack([np.cos(angles), np.sin(angles)])
    which = rng.integers(0, 3, size=n_normal)
    normal = centers[which] + rng.normal(0.0, MIXTURE_STD, size=(n_normal, 2))
    anomaly = rng.uniform(-MIXTURE_ANOMALY_BOX, MIXTURE_ANOMALY_BOX, size=(n_anomaly, 2))
    return normal, anomaly


def make_synthetic(kind, n_normal, n_anomaly, d=2, seed=0):
    """Deterministic synthetic detection task; anomalies sit off the normal structure."""
    if kind not in SYNTHETIC_KINDS:
        raise DataError(f"unknown synthetic kind {kind!r} (choose from {SYNTHETIC_KINDS})")
    if n_normal < 0 or n_anomaly < 0:
        raise DataError("sample counts must be nonnegative")
    if d < 2:
        raise DataError("synthetic data needs d >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    maker = {"ring": _ring, "two-moons": _two_moons, "gaussian-mixture": _gaussian_mixture}[kind]
    normal, anomaly = maker(n_normal, n_anomaly, d, rng)
    normal = _with_extra_dims(normal, d, rng)
    anomaly = _with_extra_dims(anomaly, d, rng)
    rows = np.vstack([normal, anomaly])
    labels = np.concatenate([np.zeros(n_normal, dtype=np.int64),
                             np.ones(n_anomaly, dtype=np.int64)])
    return LabeledDataset(rows, labels)


def _parse_float(cell, line_no, path):
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"{path}:{line_no}: non-numeric value {cell!r}") from None
    if not np.isfinite(value):
        raise DataError(f"{path}:{line_no}: non-finite value {cell!r}")
    return value


def _looks_like_header(cells):
    for cell in cells:
        try:
            float(cell)
        except ValueError:
            return True
    return False


def load_delimited(path, label_column="label", delimiter=","):
    """Parse a numeric delimited file with a binary label column.

    The first row may be a header; a string `label_column` requires one,
    an integer index works either way.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row]
    if not rows:
        raise DataError(f"{path}: file is empty")

    header = None
    start = 0
    if _looks_like_header(rows[0]):
        header = [cell.strip() for cell in rows[0]]
        start = 1

    if isinstance(label_column, str):
        if header is None:
            raise DataError(
                f"{path}: label column {label_column!r} named but the file has no header"
            )
        if label_column not in header:
            raise DataError(f"{path}: missing label column {label_column!r}")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)

    width = len(rows[start]) if start < len(rows) else (len(header) if header else 0)
    if width == 0:
        raise DataError(f"{path}: no data rows")
    if not (-width <= label_idx < width):
        raise DataError(f"{path}: label column index {label_idx} out of range for width {width}")
    label_idx %= width

    data = []
    labels = []
    for k, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise DataError(f"{path}:{k}: expected {width} fields, got {len(row)}")
        values = [_parse_float(cell, k, path) for cell in row]
        label = values.pop(label_idx)
        if label not in (0.0, 1.0):
            raise DataError(f"{path}:{k}: label must be 0 or 1, got {label!r}")
        labels.append(int(label))
        data.append(values)

    names = None
    if header is not None:
        names = [name for idx, name in enumerate(header) if idx != label_idx]
    return LabeledDataset(np.asarray(data, dtype=np.float64), np.asarray(labels), names)


def load_matrix(path, delimiter=","):
    """Parse a purely numeric delimited file (optional header, no labels)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row]
    if not rows:
        raise DataError(f"{path}: file is empty")
    header = None
    start = 0
    if _looks_like_header(rows[0]):
        header = [cell.strip() for cell in rows[0]]
        start = 1
    if start >= len(rows):
        raise DataError(f"{path}: no data rows")
    width = len(rows[start])
    data = []
    for k, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise DataError(f"{path}:{k}: expected {width} fields, got {len(row)}")
        data.append([_parse_float(cell, k, path) for cell in row])
    return np.asarray(data, dtype=np.float64), header


def save_delimited(dataset, path, delimiter=","):
    """Write a dataset with a header and trailing label column, value-exact."""
    names = dataset.feature_names or [f"f{k}" for k in range(dataset.width)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(delimiter.join([*names, "label"]) + "\n")
        for row, label in zip(dataset.rows, dataset.labels):
            cells = [repr(float(v)) for v in row]
            cells.append(str(int(label)))
            fh.write(delimiter.join(cells) + "\n")


NORMALIZATION_METHODS = ("minmax01", "zscore")


@dataclass
class Scaler:
    """Per-feature affine transform fit on training rows only.

    Features that were constant on the fitting data map to 0 and invert
    back to their original constant.
    """

    method: str
    offset: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.method not in NORMALIZATION_METHODS:
            raise DataError(f"unknown normalization method {self.method!r}")
        if self.offset.shape != self.scale.shape or self.offset.ndim != 1:
            raise DataError("scaler statistics must be matching 1-D arrays")

    @property
    def width(self):
        return self.offset.shape[0]

    def apply(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.width:
            raise ShapeError(f"expected (n, {self.width}) data, got shape {rows.shape}")
        safe = np.where(self.scale > 0.0, self.scale, 1.0)
        out = (rows - self.offset) / safe
        out[:, self.scale == 0.0] = 0.0
        return out

    def invert(self, rows):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.width:
            raise ShapeError(f"expected (n, {self.width}) data, got shape {rows.shape}")
        return rows * self.scale + self.offset

    def to_dict(self):
        return {
            "method": self.method,
            "offset": [float(v) for v in self.offset],
            "scale": [float(v) for v in self.scale],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["method"], np.asarray(d["offset"]), np.asarray(d["scale"]))


def fit_scaler(rows, method="minmax01"):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise DataError("cannot fit a scaler on empty data")
    if method == "minmax01":
        lo = rows.min(axis=0)
        return Scaler(method, lo, rows.max(axis=0) - lo)
    if method == "zscore":
        return Scaler(method, rows.mean(axis=0), rows.std(axis=0))
    raise DataError(f"unknown normalization method {method!r}")


def normalize(train, method="minmax01"):
    """Fit a scaler on the training split and return (scaled split, scaler)."""
    scaler = fit_scaler(train.rows, method)
    names = list(train.feature_names) if train.feature_names else None
    return LabeledDataset(scaler.apply(train.rows), train.labels, names), scaler


def apply_scaler(data, scaler):
    """Apply a fitted scaler to a dataset or raw (n, d) matrix."""
    if isinstance(data, LabeledDataset):
        names = list(data.feature_names) if data.feature_names else None
        return LabeledDataset(scaler.apply(data.rows), data.labels, names)
    return scaler.apply(data)


def anomaly_split(dataset, train_frac=0.75, seed=0):
    """Split into (train: normals only, test: held-out normals + all anomalies)."""
    if not (0.0 < train_frac < 1.0):
        raise DataError("train_frac must lie strictly between 0 and 1")
    normal_idx = np.flatnonzero(dataset.labels == 0)
    anomaly_idx = np.flatnonzero(dataset.labels == 1)
    if normal_idx.size == 0:
        raise DataError("cannot split a dataset with no normal rows")
    if anomaly_idx.size == 0:
        raise DataError("cannot split a dataset with no anomalies")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(normal_idx)
    n_train = int(train_frac * normal_idx.size)
    if n_train == 0:
        raise DataError("train_frac leaves no training rows")
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(np.concatenate([perm[n_train:], anomaly_idx]))
    return dataset.subset(train_idx), dataset.subset(test_idx)
