"""Model file loading and validation.

Format (JSON):

    {"type": "forest",
     "trees": [{"nodes": [{"feature": 0, "threshold": 30.0, "left": 1, "right": 2},
                          {"leaf": 0.0}, {"leaf": 1.0}]}],
     "encoding": {"Gender": {"Female": 0, "Male": 1}}}   # optional

    {"type": "mlp",
     "layers": [{"weights": [[...], ...], "bias": [...], "activation": "relu"},
                {"weights": [[...]], "bias": [...], "activation": "sigmoid"}],
     "encoding": {...}}                                   # optional

Tree nodes are listed per tree with nodes[0] as the root; left/right are
indices into that tree's node list; a node tests `value < threshold` and the
true branch goes left. Forest leaf values must lie in [0, 1]; prediction is
their mean. MLP weights are row-major (output x input); the final layer must
be a single sigmoid output. The optional encoding block maps categorical
string values to the numeric inputs the model was trained on.
"""

from __future__ import annotations

import json

import numpy as np

from cfx.models.base import CodeTranslator, ModelError
from cfx.models.mlp import MlpClassifier
from cfx.models.trees import TreeEnsembleClassifier


def _translator(obj: dict, dataset) -> CodeTranslator | None:
    encoding = obj.get("encoding")
    if not encoding:
        return None
    if dataset is None:
        raise ModelError("model declares a categorical encoding but no dataset was given")
    if not isinstance(encoding, dict):
        raise ModelError('"encoding" must map feature names to value maps')
    return CodeTranslator.from_encoding(encoding, dataset)


def model_from_dict(obj: dict, dataset=None, n_features: int | None = None):
    if not isinstance(obj, dict) or "type" not in obj:
        raise ModelError('model JSON must be an object with a "type" key')
    kind = obj["type"]
    translator = _translator(obj, dataset)
    if kind == "forest":
        trees = obj.get("trees")
        if not isinstance(trees, list) or not trees:
            raise ModelError('"trees" must be a non-empty list')
        if n_features is None:
            n_features = obj.get("n_features")
        if n_features is None:
            if dataset is not None:
                n_features = len(dataset.schema)
            else:
                n_features = 1 + max(
                    (int(nd["feature"]) for tr in trees for nd in tr.get("nodes", [])
                     if isinstance(nd, dict) and "feature" in nd),
                    default=-1,
                )
        return TreeEnsembleClassifier(trees, int(n_features), translator)
    if kind == "mlp":
        raw_layers = obj.get("layers")
        if not isinstance(raw_layers, list) or not raw_layers:
            raise ModelError('"layers" must be a non-empty list')
        layers = []
        for li, layer in enumerate(raw_layers):
            try:
                W = np.asarray(layer["weights"], dtype=np.float64)
                b = np.asarray(layer["bias"], dtype=np.float64)
                act = layer.get("activation", "identity")
            except (KeyError, TypeError, ValueError):
                raise ModelError(f"layer {li}: expected weights/bias/activation") from None
            layers.append((W, b, act))
        model = MlpClassifier(layers, translator)
        if dataset is not None and model.n_features != len(dataset.schema):
            raise ModelError(
                f"mlp expects {model.n_features} inputs, schema has {len(dataset.schema)}"
            )
        return model
    raise ModelError(f"unknown model type {kind!r}")


def load_model(path: str, dataset=None):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ModelError(f"invalid model JSON in {path}: {e}") from None
    return model_from_dict(obj, dataset)


def validate_model_dict(obj: dict, dataset=None) -> list[str]:
    """Dimensional-consistency check; returns human-readable findings."""
    notes: list[str] = []
    try:
        model = model_from_dict(obj, dataset)
    except ModelError as e:
        return [f"error: {e}"]
    if dataset is not None and model.n_features != len(dataset.schema):
        notes.append(
            f"error: model expects {model.n_features} features, "
            f"schema declares {len(dataset.schema)}"
        )
    if isinstance(model, TreeEnsembleClassifier):
        notes.append(f"ok: forest with {model.n_trees} trees, depth <= {model.max_depth}, "
                     f"{model.n_features} features")
    else:
        dims = " -> ".join(str(W.shape[1]) for W, _, _ in model.layers)
        notes.append(f"ok: mlp {dims} -> 1, {len(model.layers)} layers")
    return notes
