"""Counterfactual explanations for tabular classifiers.

The package searches for minimal, plausible, feasibility-constrained changes to
an input instance that flip a black-box classifier's decision. The search is a
custom genetic loop over a database-backed candidate space; constraints come
from a small declarative rule language.
"""

__version__ = "0.1.0"

from cfx.schema import FeatureSchema, Dataset, FeatureGroupSet, Instance
from cfx.distance import DistanceParams, dist, score
from cfx.engine import Hyperparams, ExplainResult, explain

__all__ = [
    "FeatureSchema",
    "Dataset",
    "FeatureGroupSet",
    "Instance",
    "DistanceParams",
    "dist",
    "score",
    "Hyperparams",
    "ExplainResult",
    "explain",
]
