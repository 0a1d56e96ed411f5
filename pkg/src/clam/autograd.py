"""Backpropagation through time for the reconstruction loss.

The loss for one example is ``||free * (x - x^T)||^2`` where ``x^T`` is the
particle after ``T`` recursion steps started from the masked/filled input and
``free`` marks the coordinates hidden by the mask (all ones when unmasked).
Gradients flow to the memories and the log-weights only; data are constants.

All arrays may carry leading stack axes, e.g. ``(R, B, d)`` particles with
``(R, k, d)`` memories to differentiate R independent models at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import DynamicsConfig, PrototypeSet, evolve, unit_rows


@dataclass
class GradientTape:
    """Cached forward pass: ``steps + 1`` positions and ``steps`` attraction arrays."""

    trajectory: list
    attractions: list
    free: Optional[np.ndarray] = None


@dataclass
class LossGradient:
    d_memories: np.ndarray
    loss_value: float
    d_log_weights: Optional[np.ndarray] = None


def _softmax_backward(attn, a_attn):
    return attn * (a_attn - np.sum(attn * a_attn, axis=-1, keepdims=True))


def forward(X, memories, log_weights, cfg: DynamicsConfig, observed=None, fill=None):
    """Run the recursion from the masked input and record a tape.

    ``observed`` is 1 on coordinates that stay clamped to ``X``; hidden
    coordinates start at ``fill``.  Returns ``(per_example_loss, residual, tape)``.
    """
    X = np.asarray(X, dtype=np.float64)
    if observed is None:
        free, x0, values = None, X, None
    else:
        observed = np.asarray(observed).astype(bool)
        free = (~observed).astype(np.float64)
        x0 = np.where(observed, X, np.broadcast_to(fill, X.shape))
        values = X
    states, attn_steps = evolve(x0, memories, log_weights, cfg, free, values, trajectory=True)
    residual = states[-1] - X
    if free is not None:
        residual = residual * free
    with np.errstate(over="ignore"):
        # overflow surfaces as a non-finite loss, which callers reject explicitly
        loss = np.sum(residual * residual, axis=-1)
    return loss, residual, GradientTape(states, attn_steps, free)


def backward(residual, tape: GradientTape, memories, cfg: DynamicsConfig):
    """Reverse sweep; returns ``(d_memories, d_log_weights)`` summed over the batch."""
    free = tape.free
    step_size, beta = cfg.step_factor, cfg.beta
    swap = lambda a: np.swapaxes(a, -1, -2)  # noqa: E731
    a = 2.0 * residual
    d_log_weights = np.zeros(memories.shape[:-1])
    spherical = cfg.metric == "spherical"
    if spherical:
        unit, norms = unit_rows(memories)
        d_unit = np.zeros_like(memories)
    else:
        d_memories = np.zeros_like(memories)

    for t in range(cfg.steps - 1, -1, -1):
        V, attn = tape.trajectory[t], tape.attractions[t]
        if free is not None:
            # clamped outputs are constants
            a = a * free
        if spherical:
            u = V + step_size * (attn @ unit) * (1.0 if free is None else free)
            unorm = np.linalg.norm(u, axis=-1, keepdims=True)
            n = u / unorm
            a_u = (a - n * np.sum(n * a, axis=-1, keepdims=True)) / unorm
            a_g = step_size * a_u if free is None else step_size * a_u * free
            a_v = a_u
            a_attn = a_g @ swap(unit)
            d_unit += swap(attn) @ a_g
            a_z = _softmax_backward(attn, a_attn)
            a_v = a_v + beta * (a_z @ unit)
            d_unit += beta * (swap(a_z) @ V)
        else:
            a_g = step_size * a
            a_v = a - a_g
            a_attn = a_g @ swap(memories)
            d_memories += swap(attn) @ a_g
            a_z = _softmax_backward(attn, a_attn)
            a_v = a_v + (2.0 * beta) * (a_z @ memories)
            col = np.sum(a_z, axis=-2)
            d_memories += (2.0 * beta) * (swap(a_z) @ V) - (2.0 * beta) * col[..., None] * memories
        d_log_weights += np.sum(a_z, axis=-2)
        a = a_v

    if spherical:
        d_memories = (d_unit - unit * np.sum(unit * d_unit, axis=-1, keepdims=True)) / norms
    return d_memories, d_log_weights


def _finite_or_raise(*arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite value in the recursion; beta or step_factor is likely too large")


def batch_loss_and_grad(X, protos: PrototypeSet, cfg: DynamicsConfig, masks=None, train_weights=False) -> LossGradient:
    """Summed loss and gradient over a batch of points.

    ``masks`` is ``None`` (unmasked objective) or an ``(observed, fill)`` pair
    with ``observed`` of shape ``(B, d)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.shape[-1] != protos.d:
        raise ValueError(f"dimension mismatch: data d={X.shape[-1]}, memories d={protos.d}")
    observed, fill = (None, None) if masks is None else masks
    logw = protos.log_weights
    loss, residual, tape = forward(X, protos.memories, logw, cfg, observed, fill)
    _finite_or_raise(loss)
    d_mem, d_logw = backward(residual, tape, protos.memories, cfg)
    _finite_or_raise(d_mem, d_logw)
    return LossGradient(d_mem, float(np.sum(loss)), d_logw if train_weights else None)


def loss_and_grad(x, protos: PrototypeSet, cfg: DynamicsConfig, mask=None, train_weights=False) -> LossGradient:
    """Loss and gradient for a single point ``x``; ``mask`` as in :func:`batch_loss_and_grad`."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if mask is not None:
        observed, fill = mask
        mask = (np.asarray(observed).reshape(1, -1), np.asarray(fill, dtype=np.float64).reshape(-1))
    return batch_loss_and_grad(x, protos, cfg, mask, train_weights)
