from cfx.models.base import Classifier, CodeTranslator, SpecializedClassifier, ModelError
from cfx.models.trees import TreeEnsembleClassifier
from cfx.models.mlp import MlpClassifier
from cfx.models.synthetic import SyntheticThresholdClassifier
from cfx.models.io import load_model, model_from_dict, validate_model_dict

__all__ = [
    "Classifier",
    "CodeTranslator",
    "SpecializedClassifier",
    "ModelError",
    "TreeEnsembleClassifier",
    "MlpClassifier",
    "SyntheticThresholdClassifier",
    "load_model",
    "model_from_dict",
    "validate_model_dict",
]
