"""Clustering with Dense Associative Memory attractor dynamics."""
from .dynamics import (DegenerateStateError, DynamicsConfig, ParticleState, PrototypeSet,
                       attractions, energy, run_recursion, update_step)
from .autograd import GradientTape, LossGradient, batch_loss_and_grad, loss_and_grad
from .training import MaskSpec, TrainConfig, TrainReport, adam_step, init_prototypes, sample_mask, train
from .inference import Assignment, EntropyProfile, entropy_profile, infer
from .metrics import ari, nmi, silhouette
from .baselines import KMeansModel, SoftAssignConfig, lloyd_kmeans, soft_kmeans
from .basins import BasinGrid, compute_basins
from .datasets import Dataset, gen_elongated, load_bundled, load_csv, standardize
from .persistence import ModelFile
from .estimator import ClAM

__version__ = "0.1.0"

__all__ = [
    "ClAM", "Dataset", "DynamicsConfig", "ParticleState", "PrototypeSet", "DegenerateStateError",
    "attractions", "energy", "update_step", "run_recursion",
    "GradientTape", "LossGradient", "batch_loss_and_grad", "loss_and_grad",
    "MaskSpec", "TrainConfig", "TrainReport", "adam_step", "init_prototypes", "sample_mask", "train",
    "Assignment", "EntropyProfile", "entropy_profile", "infer",
    "ari", "nmi", "silhouette",
    "KMeansModel", "SoftAssignConfig", "lloyd_kmeans", "soft_kmeans",
    "BasinGrid", "compute_basins",
    "gen_elongated", "load_bundled", "load_csv", "standardize",
    "ModelFile",
]
