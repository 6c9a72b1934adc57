"""Anomaly scores for single pairs and their ensemble average.

A pair scores a sample as reconstruction discrepancy plus `score_weight`
times the hidden-vector discrepancy; the ganomaly variant scores with the
encoding discrepancy instead.  The ensemble score is the plain arithmetic
mean over all generator-discriminator pairs.  Scoring is a gradient-free
forward pass and never touches model parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels as K
from .autodiff import Tensor
from .errors import ShapeError, VariantError


def _as_matrix(samples, width):
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeError(f"expected samples of width {width}, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ShapeError("no samples to score")
    return arr


def pair_score_rows(samples, gen, disc, weights, variant):
    """Per-sample anomaly scores for one generator-discriminator pair."""
    x = Tensor(_as_matrix(samples, gen.data_width))
    ell = weights.norm_order
    x_rec = gen.reconstruct(x)
    if variant == "ganomaly":
        z = gen.encode(x)
        z_rec = gen.encode_second(x_rec)
        return K.row_lp_power(z.values - z_rec.values, ell)
    if variant not in ("f-anogan", "egbad"):
        raise VariantError(f"unknown model variant {variant!r}")
    recon_rows = K.row_lp_power(x.values - x_rec.values, ell)
    if disc.kind == "bigan":
        _, h_real = disc.discriminate(ad.concat_cols(x, gen.encode(x)))
        _, h_rec = disc.discriminate(ad.concat_cols(x_rec, gen.encode(x_rec)))
    else:
        _, h_real = disc.discriminate(x)
        _, h_rec = disc.discriminate(x_rec)
    disc_rows = K.row_lp_power(h_real.values - h_rec.values, ell)
    return recon_rows + weights.score_weight * disc_rows


def pair_score(sample, gen, disc, weights, variant):
    """Anomaly score of a single sample under one pair (higher = more anomalous)."""
    return float(pair_score_rows(sample, gen, disc, weights, variant)[0])


def ensemble_score(sample, model):
    """Mean of the pair scores over every generator-discriminator pair."""
    rows = [
        pair_score_rows(sample, gen, disc, model.weights, model.variant)
        for gen in model.generators
        for disc in model.discriminators
    ]
    return float(np.mean([r[0] for r in rows]))


@dataclass
class AnomalyReport:
    """Scores for a sample batch: the ensemble row plus the per-pair matrix."""

    scores: np.ndarray
    pair_scores: np.ndarray
    pair_labels: list
    variant: str
    weights: object
    labels: np.ndarray = None
    seed: int = None

    def __post_init__(self):
        if self.pair_scores.ndim != 2 or self.scores.shape != (self.pair_scores.shape[1],):
            raise ShapeError("ensemble row must match the pair matrix columns")
        if len(self.pair_labels) != self.pair_scores.shape[0]:
            raise ShapeError("one label per pair row required")

    @property
    def n_samples(self):
        return self.scores.shape[0]


def score_dataset(samples, model, labels=None, seed=None, weights=None):
    """Score every sample under every pair; the ensemble row is the pair mean."""
    weights = model.weights if weights is None else weights
    arr = _as_matrix(samples, model.data_width)
    pair_rows = []
    pair_labels = []
    for i, gen in enumerate(model.generators):
        for j, disc in enumerate(model.discriminators):
            pair_rows.append(pair_score_rows(arr, gen, disc, weights, model.variant))
            pair_labels.append((i, j))
    pair_matrix = np.vstack(pair_rows)
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (arr.shape[0],):
            raise ShapeError("labels length must match the sample count")
    return AnomalyReport(
        scores=pair_matrix.mean(axis=0),
        pair_scores=pair_matrix,
        pair_labels=pair_labels,
        variant=model.variant,
        weights=weights,
        labels=labels,
        seed=seed,
    )


def write_report(report, path):
    """Write per-sample scores as delimited text (label blank when unknown)."""
    pair_cols = [f"pair_{i}_{j}" for i, j in report.pair_labels]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["sample_index", "label", "score", *pair_cols]) + "\n")
        for k in range(report.n_samples):
            label = "" if report.labels is None else str(int(report.labels[k]))
            cells = [str(k), label, repr(float(report.scores[k]))]
            cells += [repr(float(v)) for v in report.pair_scores[:, k]]
            fh.write(",".join(cells) + "\n")


def read_report(path):
    """Read back a score file: (scores, labels or None, pair matrix)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines:
        raise ShapeError(f"{path}: empty score file")
    header = lines[0].split(",")
    n_pairs = len(header) - 3
    scores, labels, pairs = [], [], []
    has_labels = True
    for ln in lines[1:]:
        cells = ln.split(",")
        if cells[1] == "":
            has_labels = False
        else:
            labels.append(int(cells[1]))
        scores.append(float(cells[2]))
        pairs.append([float(c) for c in cells[3:]])
    scores = np.asarray(scores)
    pair_matrix = np.asarray(pairs).T if n_pairs else np.empty((0, len(scores)))
    return scores, (np.asarray(labels, dtype=np.int64) if has_labels else None), pair_matrix
