"""Training loop: initialization, masking, Adam, plateau schedule and restarts.

All restarts are advanced in lockstep as one stacked model of shape
``(R, k, d)``.  Each restart owns its generator (shuffles, masks,
initialization), its Adam moments and its learning rate, so stacking is only
a vectorization device: a restart's result does not depend on how many other
restarts run beside it.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .autograd import backward, forward
from .datasets import Dataset, FeatureStats, as_dataset
from .dynamics import DegenerateStateError, DynamicsConfig, PrototypeSet

log = logging.getLogger(__name__)

FILL_MODES = ("mean", "min", "max", "zero")
VARIANTS = ("masked", "unmasked")


@dataclass(frozen=True)
class MaskSpec:
    """Per-coordinate chance of hiding a feature, and what to put in its place."""

    probability: float = 0.15
    fill_mode: str = "mean"
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.probability < 1.0):
            raise ValueError(f"mask probability must lie in [0, 1), got {self.probability!r}")
        if self.fill_mode not in FILL_MODES:
            raise ValueError(f"fill_mode must be one of {FILL_MODES}, got {self.fill_mode!r}")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    max_epochs: int = 200
    restarts: int = 10
    initial_lr: float = 0.1
    lr_reduce_factor: float = 0.8
    lr_patience_epochs: int = 5
    min_lr: float = 1e-5
    lr_loss_threshold: float = 1e-3
    variant: str = "masked"
    train_weights: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("batch_size", "max_epochs", "restarts", "lr_patience_epochs"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in ("initial_lr", "min_lr", "lr_loss_threshold"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive number, got {value!r}")
        if not (0.0 < self.lr_reduce_factor < 1.0):
            raise ValueError(f"lr_reduce_factor must lie in (0, 1), got {self.lr_reduce_factor!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


@dataclass(frozen=True)
class EpochRecord:
    restart: int
    epoch: int
    loss: float
    lr: float


@dataclass
class TrainReport:
    """Outcome of :func:`train`.

    ``loss_curves[r]`` holds the epoch losses of restart ``r`` (shorter when the
    restart was aborted); ``failures`` maps aborted restarts to a diagnostic.
    """

    best_protos: PrototypeSet
    loss_curves: list
    chosen_restart: int
    final_loss: float
    restart_protos: list = field(default_factory=list)
    lr_curves: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)


# -- initialization and masks -------------------------------------------------

def init_prototypes(data, k: int, seed=None) -> PrototypeSet:
    """k memories drawn coordinate-wise uniformly in the data's bounding box.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    data = as_dataset(data)
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k > data.n:
        warnings.warn(f"k={k} exceeds the number of points n={data.n}", stacklevel=2)
    rng = np.random.default_rng(seed)
    stats = data.feature_stats
    return PrototypeSet(rng.uniform(stats.min, stats.max, size=(int(k), data.d)))


def _draw_hidden(rng: np.random.Generator, p: float, shape) -> np.ndarray:
    """Boolean hide-mask with at least one hidden coordinate per row."""
    d = shape[-1]
    if p == 0.0:
        hidden = np.zeros(shape, dtype=bool)
        rows = hidden.reshape(-1, d)
        rows[np.arange(rows.shape[0]), rng.integers(0, d, size=rows.shape[0])] = True
        return hidden
    hidden = rng.random(shape) < p
    rows = hidden.reshape(-1, d)
    empty = ~rows.any(axis=1)
    while empty.any():
        rows[empty] = rng.random((int(empty.sum()), d)) < p
        empty = ~rows.any(axis=1)
    return hidden


def sample_mask(spec: MaskSpec, d, rng=None):
    """Draw one mask ``m`` (1 = observed, 0 = hidden) and the fill vector.

    ``d`` is either the dimension (fill values then only support
    ``fill_mode="zero"``) or a :class:`FeatureStats` / :class:`Dataset` from which
    fill values are taken.  With ``probability=0`` exactly one coordinate,
    chosen uniformly, is hidden.
    """
    if isinstance(d, Dataset):
        d = d.feature_stats
    if isinstance(d, FeatureStats):
        fill = d.fill_values(spec.fill_mode)
        dim = fill.shape[0]
    else:
        dim = int(d)
        if spec.fill_mode != "zero":
            raise ValueError("fill values need feature statistics unless fill_mode='zero'")
        fill = np.zeros(dim)
    if dim < 1:
        raise ValueError("d must be positive")
    rng = np.random.default_rng(spec.rng_seed if rng is None else rng)
    hidden = _draw_hidden(rng, spec.probability, (dim,))
    return (~hidden).astype(np.int8), fill


# -- optimizer and schedule ---------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls(np.zeros_like(params, dtype=np.float64), np.zeros_like(params, dtype=np.float64))


def adam_step(params, grads, state: AdamState, lr):
    """One Adam update, modifying ``state`` in place; returns the new params.

    ``lr`` may be an array broadcasting against ``params`` (per-restart rates).
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grads {grads.shape}, moments {state.m.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


class PlateauSchedule:
    """Multiply the rate by ``factor`` after ``patience`` epochs without an
    improvement larger than ``threshold`` (absolute), never below ``min_lr``.
    """

    def __init__(self, lr, factor=0.8, patience=5, min_lr=1e-5, threshold=1e-3):
        self.lr = float(lr)
        self.factor, self.patience = factor, patience
        self.min_lr, self.threshold = min_lr, threshold
        self.best = np.inf
        self.wait = 0

    def update(self, loss: float) -> float:
        if loss < self.best - self.threshold:
            self.best = loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                if self.lr > self.min_lr:
                    self.lr = max(self.lr * self.factor, self.min_lr)
                self.wait = 0
        return self.lr


# -- training -----------------------------------------------------------------

def _restart_generators(cfg: TrainConfig, mask: MaskSpec):
    children = np.random.SeedSequence([cfg.seed, mask.rng_seed]).spawn(cfg.restarts)
    return [np.random.default_rng(c) for c in children]


def train(data, k: int, dyn: DynamicsConfig, mask: Optional[MaskSpec] = None,
          cfg: Optional[TrainConfig] = None,
          callback: Optional[Callable[[EpochRecord], None]] = None) -> TrainReport:
    """Learn ``k`` memories by minimizing the reconstruction loss.

    Parameters
    ----------
    data : Dataset or array (n, d)
    k : int
        Number of memories (clusters).
    dyn : DynamicsConfig
        Inverse temperature, depth and metric of the recursion being trained.
    mask : MaskSpec, optional
        Masking scheme for ``variant="masked"``; ignored for ``"unmasked"``.
    cfg : TrainConfig, optional
    callback : callable, optional
        Called with an :class:`EpochRecord` after every epoch of every restart.

    Returns
    -------
    TrainReport
        The restart with the smallest final epoch loss supplies ``best_protos``.

    Raises
    ------
    FloatingPointError
        If every restart hit a non-finite loss.
    """
    data = as_dataset(data)
    mask = MaskSpec() if mask is None else mask
    cfg = TrainConfig() if cfg is None else cfg
    X = data.points
    n, d = X.shape
    R = cfg.restarts
    masked = cfg.variant == "masked"
    fill = data.feature_stats.fill_values(mask.fill_mode) if masked else None

    rngs = _restart_generators(cfg, mask)
    memories = np.stack([init_prototypes(data, k, rng).memories for rng in rngs])
    log_weights = np.zeros((R, k))
    opt_mem = AdamState.zeros_like(memories)
    opt_w = AdamState.zeros_like(log_weights)
    schedules = [PlateauSchedule(cfg.initial_lr, cfg.lr_reduce_factor, cfg.lr_patience_epochs,
                                 cfg.min_lr, cfg.lr_loss_threshold) for _ in range(R)]
    loss_curves = [[] for _ in range(R)]
    lr_curves = [[] for _ in range(R)]
    failures: dict = {}
    active = np.arange(R)

    batch = int(cfg.batch_size)
    for epoch in range(cfg.max_epochs):
        if active.size == 0:
            break
        orders = np.stack([rngs[r].permutation(n) for r in active])
        epoch_loss = np.zeros(active.size)
        lr = np.array([schedules[r].lr for r in active])
        for start in range(0, n, batch):
            idx = orders[:, start:start + batch]
            Xb = X[idx]  # (A, B, d)
            if masked:
                hidden = np.stack([_draw_hidden(rngs[r], mask.probability, Xb.shape[1:]) for r in active])
                observed = ~hidden
            else:
                observed = None
            mem_a, logw_a = memories[active], log_weights[active]
            try:
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    loss, residual, tape = forward(Xb, mem_a, logw_a, dyn, observed, fill)
                    d_mem, d_logw = backward(residual, tape, mem_a, dyn)
                    batch_loss = loss.sum(axis=-1)
                    ok = (np.isfinite(batch_loss) & np.all(np.isfinite(d_mem), axis=(-1, -2))
                          & np.all(np.isfinite(d_logw), axis=-1))
            except DegenerateStateError as exc:
                ok = np.zeros(active.size, dtype=bool)
                batch_loss = np.full(active.size, np.nan)
                reason = str(exc)
            else:
                reason = "non-finite loss or gradient"
            if not ok.all():
                for pos in np.flatnonzero(~ok):
                    r = int(active[pos])
                    failures[r] = f"epoch {epoch}: {reason}"
                    log.warning("restart %d aborted at epoch %d: %s", r, epoch, reason)
                if not ok.any():
                    active = active[:0]
                    break
                keep = np.flatnonzero(ok)
                active, orders, epoch_loss, lr = active[keep], orders[keep], epoch_loss[keep], lr[keep]
                d_mem, d_logw, batch_loss = d_mem[keep], d_logw[keep], batch_loss[keep]

            epoch_loss += batch_loss
            memories[active] = _adam_rows(memories, d_mem, opt_mem, active, lr[:, None, None])
            if cfg.train_weights:
                log_weights[active] = _adam_rows(log_weights, d_logw, opt_w, active, lr[:, None])
        else:
            epoch_loss /= n
            for pos, r in enumerate(active):
                loss_curves[r].append(float(epoch_loss[pos]))
                lr_curves[r].append(float(lr[pos]))
                schedules[r].update(float(epoch_loss[pos]))
                if callback is not None:
                    callback(EpochRecord(int(r), epoch, float(epoch_loss[pos]), float(lr[pos])))
            continue
        break  # every restart failed

    survivors = [r for r in range(R) if r not in failures]
    if not survivors:
        raise FloatingPointError("all restarts produced non-finite losses: " + "; ".join(
            f"restart {r}: {msg}" for r, msg in sorted(failures.items())))
    finals = {r: loss_curves[r][-1] for r in survivors}
    chosen = min(survivors, key=lambda r: (finals[r], r))
    protos = [None if r in failures else PrototypeSet.from_log_weights(
        memories[r], log_weights[r] if cfg.train_weights else None) for r in range(R)]
    return TrainReport(protos[chosen], loss_curves, chosen, finals[chosen], protos, lr_curves, failures)


def _adam_rows(params, grads, state: AdamState, rows, lr):
    """Adam on the active rows of a stacked parameter; inactive rows untouched."""
    sub = AdamState(state.m[rows], state.v[rows], state.t, state.beta1, state.beta2, state.eps)
    out = adam_step(params[rows], grads, sub, lr)
    state.m[rows], state.v[rows], state.t = sub.m, sub.v, sub.t
    return out
