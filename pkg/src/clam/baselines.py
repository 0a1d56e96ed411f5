"""Comparators: Lloyd's k-means with k-means++ seeding, and soft k-means.

Both are written out here rather than taken from a library so the seeding
distribution, the empty-cluster rule and the stopping rule are explicit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import softmax

from .datasets import as_dataset
from .dynamics import PrototypeSet

MAX_LLOYD_ITER = 300


@dataclass(frozen=True)
class KMeansModel:
    centers: np.ndarray
    inertia: float
    n_init: int
    labels: np.ndarray
    n_iter: int
    inertia_history: tuple = field(default=(), compare=False)

    def as_prototypes(self) -> PrototypeSet:
        return PrototypeSet(self.centers)


@dataclass(frozen=True)
class SoftAssignConfig:
    """Fixed-``gamma`` soft k-means trained by full-batch gradient descent."""

    gamma: float
    epochs: int = 500
    lr: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")
        if not (self.lr > 0):
            raise ValueError("lr must be positive")


def _sq_dists(X, C):
    d2 = np.sum(X * X, axis=1)[:, None] - 2.0 * X @ C.T + np.sum(C * C, axis=1)[None, :]
    return np.maximum(d2, 0.0)


def inertia(X, centers) -> float:
    """Sum of squared distances from each point to its nearest center."""
    X = np.asarray(X, dtype=np.float64)
    diff = X[:, None, :] - np.asarray(centers)[None, :, :]
    return float(np.min(np.einsum("nkd,nkd->nk", diff, diff), axis=1).sum())


def kmeanspp_init(X, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++: first center uniform, then sample proportional to squared
    distance to the nearest chosen center."""
    n = X.shape[0]
    idx = [int(rng.integers(n))]
    closest = np.sum((X - X[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining mass is on chosen points; pick any unchosen index
            pool = np.setdiff1d(np.arange(n), idx)
            nxt = int(rng.choice(pool))
        else:
            nxt = int(rng.choice(n, p=closest / total))
        idx.append(nxt)
        closest = np.minimum(closest, np.sum((X - X[nxt]) ** 2, axis=1))
    return X[idx].copy()


def lloyd_run(X, init_centers, max_iter: int = MAX_LLOYD_ITER):
    """Alternate assignment and mean updates until no label changes.

    Returns ``(centers, labels, inertia_history, n_iter)``.  An emptied cluster is
    moved onto the point currently farthest from its own center.
    """
    C = np.array(init_centers, dtype=np.float64)
    k = C.shape[0]
    labels = None
    history = []
    for it in range(max_iter):
        d2 = _sq_dists(X, C)
        new = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(new)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(C)
        np.add.at(sums, labels, X)
        empty = counts == 0
        C[~empty] = sums[~empty] / counts[~empty, None]
        if empty.any():
            own = np.sum((X - C[labels]) ** 2, axis=1)
            for j in np.flatnonzero(empty):
                far = int(np.argmax(own))
                C[j] = X[far]
                own[far] = -1.0
    # exact final bookkeeping against the final centers
    diff = X[:, None, :] - C[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    labels = np.argmin(d2, axis=1)
    return C, labels, history, it + 1


def lloyd_kmeans(data, k: int, n_init: int = 1000, seed: int = 0, max_iter: int = MAX_LLOYD_ITER) -> KMeansModel:
    """Best of ``n_init`` k-means++-seeded Lloyd runs, ranked by inertia."""
    X = as_dataset(data).points
    n = X.shape[0]
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")
    if n_init < 1:
        raise ValueError("n_init must be positive")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        C, labels, hist, n_iter = lloyd_run(X, kmeanspp_init(X, int(k), rng), max_iter)
        value = inertia(X, C)
        if best is None or value < best[0]:
            best = (value, C, labels, hist, n_iter)
    value, C, labels, hist, n_iter = best
    return KMeansModel(C, value, int(n_init), labels, n_iter, tuple(hist))


def soft_objective(X, centers, gamma: float) -> float:
    """Sum over points of the softmax(-gamma d^2)-weighted squared distances."""
    d2 = _sq_dists(np.asarray(X, dtype=np.float64), np.asarray(centers, dtype=np.float64))
    w = softmax(-gamma * d2, axis=1)
    return float(np.sum(w * d2))


def soft_kmeans(data, k: int, cfg: SoftAssignConfig, init: Optional[np.ndarray] = None) -> PrototypeSet:
    """Minimize the soft-assignment objective by gradient descent.

    The step uses the per-point mean of the objective so ``cfg.lr`` does not
    scale with n.  ``init`` defaults to a k-means++ draw.

    Raises
    ------
    FloatingPointError
        If the iterate becomes non-finite.
    """
    X = as_dataset(data).points
    n = X.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points n={n}")
    rng = np.random.default_rng(cfg.seed)
    C = kmeanspp_init(X, int(k), rng) if init is None else np.array(init, dtype=np.float64)
    if C.shape != (k, X.shape[1]):
        raise ValueError(f"init must have shape {(k, X.shape[1])}")
    for _ in range(cfg.epochs):
        d2 = _sq_dists(X, C)
        w = softmax(-cfg.gamma * d2, axis=1)
        mean_d2 = np.sum(w * d2, axis=1, keepdims=True)
        coef = w * (1.0 - cfg.gamma * (d2 - mean_d2))  # d objective / d d2
        grad = 2.0 * (coef.sum(axis=0)[:, None] * C - coef.T @ X) / n
        C = C - cfg.lr * grad
        if not np.all(np.isfinite(C)):
            raise FloatingPointError("soft k-means diverged; lower lr or gamma")
    return PrototypeSet(C)
