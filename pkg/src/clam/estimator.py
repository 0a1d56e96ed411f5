"""scikit-learn compatible estimator wrapping training and inference."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .autograd import forward
from .datasets import Dataset
from .dynamics import DynamicsConfig, PrototypeSet
from .inference import infer
from .training import MaskSpec, TrainConfig, train


class ClAM(ClusterMixin, TransformerMixin, BaseEstimator):
    """Clustering with associative-memory attractor dynamics.

    Parameters
    ----------
    n_clusters : int
        Number of memories.
    beta : float
        Inverse temperature of the attraction softmax.
    steps : int
        Recursion depth used in training and prediction.
    step_factor : float or None
        Step size of the recursion; ``None`` means ``1 / steps``.
    metric : {"euclidean", "spherical"}
    learning_rate, batch_size, max_epochs, n_restarts
        Optimizer settings, see :class:`clam.training.TrainConfig`.
    mask_prob : float
        Chance of hiding each coordinate of a training point.
    mask_fill : {"mean", "min", "max", "zero"}
        Value placed in hidden coordinates.
    variant : {"masked", "unmasked"}
        ``"unmasked"`` reconstructs the full point from itself.
    train_weights : bool
        Learn a positive weight per memory.
    lr_reduce_factor, lr_patience, min_lr, lr_threshold
        Plateau schedule.
    random_state : int
        Seed for initialization, shuffling and masks.

    Attributes
    ----------
    cluster_centers_ : ndarray (k, d)
    weights_ : ndarray (k,) or None
    labels_ : ndarray (n,)
    loss_curve_ : list of float
        Epoch losses of the selected restart.
    report_ : TrainReport
    """

    def __init__(self, n_clusters=8, *, beta=1.0, steps=10, step_factor=None, metric="euclidean",
                 learning_rate=0.1, batch_size=8, max_epochs=200, n_restarts=10,
                 mask_prob=0.15, mask_fill="mean", variant="masked", train_weights=False,
                 lr_reduce_factor=0.8, lr_patience=5, min_lr=1e-5, lr_threshold=1e-3,
                 random_state=0):
        self.n_clusters = n_clusters
        self.beta = beta
        self.steps = steps
        self.step_factor = step_factor
        self.metric = metric
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.n_restarts = n_restarts
        self.mask_prob = mask_prob
        self.mask_fill = mask_fill
        self.variant = variant
        self.train_weights = train_weights
        self.lr_reduce_factor = lr_reduce_factor
        self.lr_patience = lr_patience
        self.min_lr = min_lr
        self.lr_threshold = lr_threshold
        self.random_state = random_state

    def _dynamics(self) -> DynamicsConfig:
        return DynamicsConfig(self.beta, self.steps, self.step_factor, self.metric)

    def _seed(self) -> int:
        if self.random_state is None:
            return int(np.random.SeedSequence().entropy % (2**63))
        if isinstance(self.random_state, np.random.RandomState):
            return int(self.random_state.randint(2**31 - 1))
        return int(self.random_state)

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        seed = self._seed()
        cfg = TrainConfig(
            batch_size=self.batch_size, max_epochs=self.max_epochs, restarts=self.n_restarts,
            initial_lr=self.learning_rate, lr_reduce_factor=self.lr_reduce_factor,
            lr_patience_epochs=self.lr_patience, min_lr=self.min_lr,
            lr_loss_threshold=self.lr_threshold, variant=self.variant,
            train_weights=self.train_weights, seed=seed)
        dyn = self._dynamics()
        self.report_ = train(Dataset(X), self.n_clusters, dyn, MaskSpec(self.mask_prob, self.mask_fill, seed), cfg)
        protos = self.report_.best_protos
        self.cluster_centers_ = np.array(protos.memories)
        self.weights_ = None if protos.weights is None else np.array(protos.weights)
        self.loss_curve_ = list(self.report_.loss_curves[self.report_.chosen_restart])
        self.labels_ = infer(X, protos, dyn).labels
        return self

    @property
    def prototypes_(self) -> PrototypeSet:
        check_is_fitted(self, "cluster_centers_")
        return PrototypeSet(self.cluster_centers_, self.weights_)

    def _check(self, X):
        check_is_fitted(self, "cluster_centers_")
        return validate_data(self, X, dtype=np.float64, reset=False)

    def predict(self, X):
        """Cluster of the memory nearest to each point's end state."""
        X = self._check(X)
        return infer(X, self.prototypes_, self._dynamics()).labels

    def converge(self, X):
        """End states ``x^T`` of the recursion started at each point."""
        X = self._check(X)
        return infer(X, self.prototypes_, self._dynamics()).converged_positions

    def transform(self, X):
        """Distances from each end state to every memory, shape (n, k)."""
        XT = self.converge(X)
        diff = XT[:, None, :] - self.cluster_centers_[None, :, :]
        return np.sqrt(np.einsum("nkd,nkd->nk", diff, diff))

    def score(self, X, y=None):
        """Negative mean unmasked reconstruction error (higher is better)."""
        X = self._check(X)
        protos = self.prototypes_
        loss, _, _ = forward(X, protos.memories, protos.log_weights, self._dynamics())
        return -float(np.mean(loss))
