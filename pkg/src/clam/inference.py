"""Cluster assignment by running the recursion, and the attraction entropy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .datasets import as_dataset
from .dynamics import DynamicsConfig, PrototypeSet, evolve, logits


@dataclass(frozen=True)
class Assignment:
    """Cluster ids, converged positions ``x^T`` and distances to the chosen memory."""

    labels: np.ndarray
    converged_positions: np.ndarray
    residuals: np.ndarray
    last_step_norms: np.ndarray

    @property
    def max_step_norm(self) -> float:
        return float(self.last_step_norms.max()) if self.last_step_norms.size else 0.0


@dataclass(frozen=True)
class EntropyProfile:
    entropies: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray


def nearest(points, memories) -> tuple[np.ndarray, np.ndarray]:
    """Index of (and distance to) the nearest memory; ties go to the lowest index."""
    diff = points[:, None, :] - memories[None, :, :]
    d2 = np.einsum("nkd,nkd->nk", diff, diff)
    labels = np.argmin(d2, axis=1)
    return labels, np.sqrt(d2[np.arange(len(labels)), labels])


def infer(data, protos: PrototypeSet, dyn: DynamicsConfig, chunk: int = 4096) -> Assignment:
    """Assign each point to the memory closest to where its particle ends up.

    The recursion runs unclamped for ``dyn.steps`` steps from the point itself.
    Points are processed in chunks to bound memory use.
    """
    X = as_dataset(data).points
    if X.shape[1] != protos.d:
        raise ValueError(f"dimension mismatch: data d={X.shape[1]}, memories d={protos.d}")
    mem, logw = protos.memories, protos.log_weights
    labels = np.empty(X.shape[0], dtype=np.int64)
    positions = np.empty_like(X)
    residuals = np.empty(X.shape[0])
    step_norms = np.empty(X.shape[0])
    for start in range(0, X.shape[0], chunk):
        sl = slice(start, start + chunk)
        states, _ = evolve(X[sl], mem, logw, dyn, trajectory=True)
        final = states[-1]
        positions[sl] = final
        step_norms[sl] = np.linalg.norm(final - states[-2], axis=1)
        labels[sl], residuals[sl] = nearest(final, mem)
    return Assignment(labels, positions, residuals, step_norms)


def entropy_profile(data, protos: PrototypeSet, beta: float, bins=20) -> EntropyProfile:
    """Entropy of the attraction distribution at each raw point.

    Uses the euclidean softmax of ``-beta * ||memory - x||^2`` (plus
    log-weights) without running the recursion.  ``beta=0`` is allowed and
    gives the uniform distribution.
    """
    X = as_dataset(data).points
    if beta < 0:
        raise ValueError("beta must be non-negative")
    z = logits(X, protos.memories, protos.log_weights, beta)
    p = softmax(z, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    H = np.clip(-plogp.sum(axis=1), 0.0, np.log(protos.k))
    counts, edges = np.histogram(H, bins=bins, range=(0.0, max(np.log(protos.k), 1e-12)))
    return EntropyProfile(H, edges, counts)
