"""Differentiable architecture search for text classification with
discretized node representations."""

from .autograd import Tensor, backward
from .dag import DerivedArchitecture, FrozenDag, SearchDag
from .discretize import DiscretizationHead, aggregate_j_d, categorize, j_d, mi_estimate
from .model import TextClassifier, j_c, joint_loss
from .ops import OP_KINDS, OperationSpec, apply, init_parameters, make_op
from .train import Adam, SearchRun, TrainConfig, retrain, search, select_and_retrain

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "DerivedArchitecture",
    "DiscretizationHead",
    "FrozenDag",
    "OP_KINDS",
    "OperationSpec",
    "SearchDag",
    "SearchRun",
    "Tensor",
    "TextClassifier",
    "TrainConfig",
    "aggregate_j_d",
    "apply",
    "backward",
    "categorize",
    "init_parameters",
    "j_c",
    "j_d",
    "joint_loss",
    "make_op",
    "mi_estimate",
    "retrain",
    "search",
    "select_and_retrain",
]
