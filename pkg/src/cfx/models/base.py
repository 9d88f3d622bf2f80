"""Classifier contract and the category-encoding bridge.

Classifiers consume matrices in the dataset's internal code space (float64;
categoricals dictionary-encoded). Model files may declare their own encoding
for categorical features; the bridge translates dataset codes to model inputs
once per batch. Codes with no mapped model value translate to +inf, which
fails every `value < threshold` test, i.e. unknown categories take the
designated default branch (right).
"""

from __future__ import annotations

import numpy as np


class ModelError(ValueError):
    """Malformed or inconsistent model definition."""


class SpecializedClassifier:
    """A classifier partially evaluated for a context (x, changed features)."""

    changed_feats: np.ndarray

    def predict_partial(self, cols: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Classifier:
    n_features: int
    supports_specialization: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Scores in [0, 1] for a (rows, n_features) code matrix."""
        raise NotImplementedError

    def predict_one(self, x: np.ndarray) -> float:
        return float(self.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])

    def specialize(self, x: np.ndarray, changed_feats: np.ndarray) -> SpecializedClassifier:
        raise NotImplementedError(f"{type(self).__name__} does not support specialization")


class CodeTranslator:
    """Per-feature lookup from dataset category codes to model input values."""

    def __init__(self, n_features: int, tables: dict[int, np.ndarray]):
        self.n_features = n_features
        self.tables = tables  # feature index -> float64 lookup (code -> value)

    @classmethod
    def identity(cls, n_features: int) -> "CodeTranslator":
        return cls(n_features, {})

    @classmethod
    def from_encoding(cls, encoding: dict, dataset) -> "CodeTranslator":
        tables: dict[int, np.ndarray] = {}
        for name, mapping in encoding.items():
            i = dataset.schema.index(name)
            cats = dataset.categories.get(i)
            if cats is None:
                raise ModelError(f"encoding declared for non-categorical feature {name!r}")
            table = np.full(len(cats), np.inf, dtype=np.float64)
            for value, model_val in mapping.items():
                if value in cats:
                    table[cats.index(value)] = float(model_val)
            tables[i] = table
        return cls(len(dataset.schema), tables)

    @property
    def is_identity(self) -> bool:
        return not self.tables

    def translate(self, X: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return X
        out = X.copy()
        for i, table in self.tables.items():
            codes = X[:, i].astype(np.int64)
            out[:, i] = table[codes]
        return out

    def translate_row(self, x: np.ndarray) -> np.ndarray:
        return self.translate(x.reshape(1, -1))[0]

    def translate_cols(self, cols: np.ndarray, feats: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return cols
        out = cols.copy()
        for k, f in enumerate(feats):
            table = self.tables.get(int(f))
            if table is not None:
                out[:, k] = table[cols[:, k].astype(np.int64)]
        return out
