"""Fully-connected feed-forward classifier.

Only the first layer sees raw features, so only it can be specialized: for a
fixed context, the dot products of static features with the first-layer
weights fold into the bias, leaving a thin matrix over the changed columns.
Later layers run unchanged. Folding reassociates float additions, so
specialized outputs agree with the full forward pass to ~1e-9, not bit-exactly.
"""

from __future__ import annotations

import numpy as np

from cfx.models.base import Classifier, CodeTranslator, ModelError, SpecializedClassifier

_ACTIVATIONS = ("relu", "sigmoid", "identity")


def _activate(name: str, H: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(H, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-H))
    return H


class MlpClassifier(Classifier):
    supports_specialization = True

    def __init__(self, layers: list[tuple[np.ndarray, np.ndarray, str]],
                 translator: CodeTranslator | None = None):
        """layers: [(weights (out, in), bias (out,), activation)]."""
        if not layers:
            raise ModelError("mlp needs at least one layer")
        prev_out = None
        for li, (W, b, act) in enumerate(layers):
            if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
                raise ModelError(f"layer {li}: weight/bias shapes disagree")
            if prev_out is not None and W.shape[1] != prev_out:
                raise ModelError(
                    f"layer {li}: input dim {W.shape[1]} != previous output {prev_out}"
                )
            if act not in _ACTIVATIONS:
                raise ModelError(f"layer {li}: unknown activation {act!r}")
            prev_out = W.shape[0]
        W_last, _, act_last = layers[-1]
        if W_last.shape[0] != 1 or act_last != "sigmoid":
            raise ModelError("final layer must have one sigmoid output")
        self.layers = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64), act)
                       for W, b, act in layers]
        self.n_features = self.layers[0][0].shape[1]
        self.translator = translator or CodeTranslator.identity(self.n_features)

    def _forward_from(self, H: np.ndarray, start: int) -> np.ndarray:
        for W, b, act in self.layers[start:]:
            H = _activate(act, H @ W.T + b)
        return H[:, 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        Xm = self.translator.translate(np.asarray(X, dtype=np.float64))
        W, b, act = self.layers[0]
        H = _activate(act, Xm @ W.T + b)
        return self._forward_from(H, 1)

    def specialize(self, x: np.ndarray, changed_feats: np.ndarray) -> "SpecializedMlp":
        return SpecializedMlp(self, np.asarray(x, dtype=np.float64),
                              np.asarray(changed_feats, dtype=np.int64))


class SpecializedMlp(SpecializedClassifier):
    def __init__(self, parent: MlpClassifier, x: np.ndarray, changed_feats: np.ndarray):
        self.parent = parent
        self.changed_feats = changed_feats
        xm = parent.translator.translate_row(x)
        W, b, act = parent.layers[0]
        static = np.ones(parent.n_features, dtype=bool)
        static[changed_feats] = False
        self.folded_bias = b + W[:, static] @ xm[static]
        self.W_changed = np.ascontiguousarray(W[:, changed_feats])
        self.act = act

    def predict_partial(self, cols: np.ndarray) -> np.ndarray:
        p = self.parent
        colsm = p.translator.translate_cols(np.asarray(cols, dtype=np.float64),
                                            self.changed_feats)
        H = _activate(self.act, colsm @ self.W_changed.T + self.folded_bias)
        return p._forward_from(H, 1)
