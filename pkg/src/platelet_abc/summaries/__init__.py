"""Summary statistics learned from simulations or labeled cohorts."""

from .features import FeatureExpansion, Standardizer, expanded_dim, polynomial_expansion
from .lmnn import LmnnProblem, grid_search_dssl, knn_loo_accuracy, train_dssl
from .network import MLP, Adam
from .neural import (
    network_regression_loss,
    network_triplet_loss,
    regression_loss,
    sample_triplets,
    train_sasl,
    train_tlsl,
    triplet_loss,
)
from .transform import SummaryTransform, UntrainedTransformError, apply_summary

__all__ = [
    "Adam", "FeatureExpansion", "LmnnProblem", "MLP", "Standardizer", "SummaryTransform",
    "UntrainedTransformError", "apply_summary", "expanded_dim", "grid_search_dssl",
    "knn_loo_accuracy", "network_regression_loss", "network_triplet_loss", "polynomial_expansion",
    "regression_loss", "sample_triplets", "train_dssl", "train_sasl", "train_tlsl", "triplet_loss",
]
