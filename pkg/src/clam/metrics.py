"""Clustering quality metrics.

Thin wrappers over :mod:`sklearn.metrics` that pin the conventions used in
this package:

* silhouette uses the euclidean metric and gives singleton clusters a score
  of 0;
* NMI normalizes mutual information by the arithmetic mean of the two label
  entropies;
* ARI is the pair-counting index with the permutation-model expectation.
"""
from __future__ import annotations

import numpy as np
from sklearn import metrics as _skm


def _labels(a, name="labels"):
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return a


def silhouette(data, labels) -> float:
    """Mean silhouette coefficient in [-1, 1].

    Raises
    ------
    ValueError
        When all points share one label (the score is undefined).
    """
    X = np.asarray(getattr(data, "points", data), dtype=np.float64)
    labels = _labels(labels)
    if X.shape[0] != labels.shape[0]:
        raise ValueError("data and labels differ in length")
    n_labels = np.unique(labels).size
    if n_labels < 2:
        raise ValueError("silhouette is undefined when all points are in one cluster")
    if n_labels == X.shape[0]:
        # every cluster is a singleton
        return 0.0
    return float(_skm.silhouette_score(X, labels, metric="euclidean"))


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information (arithmetic-mean normalization)."""
    a, b = _labels(labels_a, "labels_a"), _labels(labels_b, "labels_b")
    if a.shape != b.shape or a.size == 0:
        raise ValueError("label vectors must be non-empty and of equal length")
    return float(_skm.normalized_mutual_info_score(a, b, average_method="arithmetic"))


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index."""
    a, b = _labels(labels_a, "labels_a"), _labels(labels_b, "labels_b")
    if a.shape != b.shape or a.size == 0:
        raise ValueError("label vectors must be non-empty and of equal length")
    return float(_skm.adjusted_rand_score(a, b))


def cluster_sizes(labels, k: int) -> np.ndarray:
    """Counts per cluster id ``0 .. k-1`` (empty clusters included)."""
    return np.bincount(np.asarray(labels, dtype=np.int64), minlength=k)


def report(data, labels, truth=None) -> dict:
    """Flat metrics dictionary: sc, and nmi/ari when ground truth is given."""
    out = {"n": int(len(labels)), "clusters_used": int(np.unique(labels).size)}
    try:
        out["sc"] = silhouette(data, labels)
    except ValueError:
        out["sc"] = float("nan")
    if truth is not None:
        out["nmi"] = nmi(truth, labels)
        out["ari"] = ari(truth, labels)
    return out
