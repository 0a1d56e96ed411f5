"""Energy, attractions and the finite-difference attractor recursion.

Every kernel accepts particles as a ``(..., n, d)`` array and memories as a
``(..., k, d)`` array, so the same code drives a single particle, a batch,
or a stack of independent models (one per training restart).

Euclidean logits drop the per-particle ``||v||^2`` term, which cancels in the
softmax:  ``-beta ||m - v||^2 = 2 beta <m, v> - beta ||m||^2 - beta ||v||^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp, softmax

METRICS = ("euclidean", "spherical")

# below this norm the spherical renormalization is ill-defined
_MIN_SPHERICAL_NORM = 1e-12


class DegenerateStateError(FloatingPointError):
    """Raised when a spherical update collapses a particle onto the origin."""


@dataclass(frozen=True)
class PrototypeSet:
    """k memories (rows) plus optional positive per-memory weights."""

    memories: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        memories = np.array(self.memories, dtype=np.float64)
        if memories.ndim != 2 or memories.shape[0] < 1 or memories.shape[1] < 1:
            raise ValueError(f"memories must be a non-empty k x d matrix, got shape {memories.shape}")
        if not np.all(np.isfinite(memories)):
            raise ValueError("memories contain non-finite entries")
        memories.setflags(write=False)
        object.__setattr__(self, "memories", memories)
        if self.weights is not None:
            weights = np.array(self.weights, dtype=np.float64).reshape(-1)
            if weights.shape[0] != memories.shape[0]:
                raise ValueError(f"expected {memories.shape[0]} weights, got {weights.shape[0]}")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise ValueError("weights must be finite and strictly positive")
            weights.setflags(write=False)
            object.__setattr__(self, "weights", weights)

    @property
    def k(self) -> int:
        return self.memories.shape[0]

    @property
    def d(self) -> int:
        return self.memories.shape[1]

    @property
    def log_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.zeros(self.k)
        return np.log(self.weights)

    @classmethod
    def from_log_weights(cls, memories, log_weights=None) -> "PrototypeSet":
        weights = None if log_weights is None else np.exp(log_weights)
        return cls(memories, weights)


@dataclass(frozen=True)
class DynamicsConfig:
    """Inverse temperature, recursion depth, step size and metric.

    ``step_factor`` defaults to ``1 / steps``.
    """

    beta: float
    steps: int = 10
    step_factor: Optional[float] = None
    metric: str = "euclidean"

    def __post_init__(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be a positive finite number, got {self.beta!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        object.__setattr__(self, "steps", int(self.steps))
        if self.step_factor is None:
            object.__setattr__(self, "step_factor", 1.0 / self.steps)
        if not (0 < self.step_factor <= 1):
            raise ValueError(f"step_factor must lie in (0, 1], got {self.step_factor!r}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")


@dataclass
class ParticleState:
    """Particle position(s) with an optional clamp.

    ``clamp_mask`` is 1 on observed (held) coordinates and 0 on free ones;
    held coordinates always equal ``clamp_values``.
    """

    position: np.ndarray
    clamp_mask: Optional[np.ndarray] = None
    clamp_values: Optional[np.ndarray] = None
    # norm of the last update, reported for convergence diagnostics
    last_step_norm: float = field(default=np.nan, compare=False)

    def __post_init__(self):
        self.position = np.array(self.position, dtype=np.float64)
        if self.clamp_mask is not None:
            self.clamp_mask = np.asarray(self.clamp_mask).astype(bool)
            if self.clamp_mask.shape != self.position.shape:
                raise ValueError("clamp_mask must have the same shape as position")
            values = self.position if self.clamp_values is None else self.clamp_values
            self.clamp_values = np.array(np.broadcast_to(values, self.position.shape), dtype=np.float64)
            self.position = np.where(self.clamp_mask, self.clamp_values, self.position)


def _check_dims(v: np.ndarray, protos: PrototypeSet) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != protos.d:
        raise ValueError(f"dimension mismatch: particle has d={v.shape[-1]}, memories have d={protos.d}")
    if not np.all(np.isfinite(v)):
        raise ValueError("particle contains non-finite entries")
    return v


def unit_rows(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(a / ||a||, ||a||)`` row-wise."""
    norms = np.linalg.norm(a, axis=-1, keepdims=True)
    return a / norms, norms


def logits(V, memories, log_weights, beta, metric="euclidean"):
    """Softmax logits up to a per-particle constant, shape ``(..., n, k)``."""
    if metric == "spherical":
        unit, _ = unit_rows(memories)
        return beta * (V @ np.swapaxes(unit, -1, -2)) + log_weights[..., None, :]
    sq = np.sum(memories * memories, axis=-1)
    return (2.0 * beta) * (V @ np.swapaxes(memories, -1, -2)) - beta * sq[..., None, :] + log_weights[..., None, :]


def step(V, memories, log_weights, cfg: DynamicsConfig, free=None, clamp_values=None):
    """One recursion step for a stack of particles.

    ``free`` is the complement of the clamp mask (1 = free coordinate).
    Returns ``(V_next, attn)``.
    """
    attn = softmax(logits(V, memories, log_weights, cfg.beta, cfg.metric), axis=-1)
    if cfg.metric == "spherical":
        unit, _ = unit_rows(memories)
        move = cfg.step_factor * (attn @ unit)
        if free is not None:
            move = move * free
        u = V + move
        norm = np.linalg.norm(u, axis=-1, keepdims=True)
        if np.any(norm < _MIN_SPHERICAL_NORM):
            raise DegenerateStateError("spherical update produced a near-zero vector")
        V_next = u / norm
    else:
        move = cfg.step_factor * (attn @ memories - V)
        if free is not None:
            move = move * free
        V_next = V + move
    if free is not None:
        V_next = np.where(free.astype(bool), V_next, clamp_values)
    return V_next, attn


def evolve(V, memories, log_weights, cfg: DynamicsConfig, free=None, clamp_values=None, trajectory=False):
    """Apply :func:`step` ``cfg.steps`` times.

    With ``trajectory=True`` returns ``(states, attn_steps)`` where ``states`` has
    ``steps + 1`` entries; otherwise returns the final state only.
    """
    states, attn_steps = [V], []
    for _ in range(cfg.steps):
        V, attn = step(V, memories, log_weights, cfg, free, clamp_values)
        if trajectory:
            states.append(V)
            attn_steps.append(attn)
    if trajectory:
        return states, attn_steps
    return V


def energy(v, protos: PrototypeSet, cfg: DynamicsConfig) -> np.ndarray:
    """Log-sum-exp energy of particle(s) ``v``; scalar for a single vector."""
    v = _check_dims(v, protos)
    if cfg.metric == "spherical":
        norms = np.linalg.norm(v, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("spherical energy requires unit-norm particles")
        unit, _ = unit_rows(protos.memories)
        z = cfg.beta * (v @ unit.T)
    else:
        diff = protos.memories - v[..., None, :]
        z = -cfg.beta * np.sum(diff * diff, axis=-1)
    return -logsumexp(z + protos.log_weights, axis=-1) / cfg.beta


def attractions(v, protos: PrototypeSet, cfg: DynamicsConfig) -> np.ndarray:
    """Softmax attraction of particle(s) ``v`` toward each memory."""
    v = _check_dims(v, protos)
    V = np.atleast_2d(v)
    attn = softmax(logits(V, protos.memories, protos.log_weights, cfg.beta, cfg.metric), axis=-1)
    return attn.reshape(v.shape[:-1] + (protos.k,))


def _unpack(state: ParticleState):
    V = np.atleast_2d(state.position)
    if state.clamp_mask is None:
        return V, None, None
    free = (~np.atleast_2d(state.clamp_mask)).astype(np.float64)
    return V, free, np.atleast_2d(state.clamp_values)


def update_step(state: ParticleState, protos: PrototypeSet, cfg: DynamicsConfig) -> ParticleState:
    """Advance a particle state by one finite-difference step."""
    _check_dims(state.position, protos)
    V, free, values = _unpack(state)
    V_next, _ = step(V, protos.memories, protos.log_weights, cfg, free, values)
    new = ParticleState(V_next.reshape(state.position.shape), state.clamp_mask, state.clamp_values)
    new.last_step_norm = float(np.linalg.norm(V_next - V))
    return new


def run_recursion(state0: ParticleState, protos: PrototypeSet, cfg: DynamicsConfig, trajectory: bool = False):
    """Run ``cfg.steps`` updates from ``state0``.

    Returns the final :class:`ParticleState`, or ``(final, positions)`` with
    all ``steps + 1`` positions when ``trajectory`` is set.
    """
    _check_dims(state0.position, protos)
    V, free, values = _unpack(state0)
    states, _ = evolve(V, protos.memories, protos.log_weights, cfg, free, values, trajectory=True)
    shape = state0.position.shape
    final = ParticleState(states[-1].reshape(shape), state0.clamp_mask, state0.clamp_values)
    final.last_step_norm = float(np.linalg.norm(states[-1] - states[-2]))
    if trajectory:
        return final, [s.reshape(shape) for s in states]
    return final
