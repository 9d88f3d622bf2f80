"""Ground-truth classifier for the synthetic benchmark suite.

A conjunction of `feature >= threshold` conditions. Returns 1 when every
condition holds; otherwise 0.5 - d, where d sums the range-normalized
shortfall of each failing condition (how far the value sits below its
threshold, as a fraction of the feature's span). The optimal counterfactual
lifts every failing feature exactly to its threshold, so the best achievable
distance is known analytically -- which is what makes the suite a ground
truth.

The shortfall sum is deliberately not averaged over features: its per-feature
slope then dominates the slope of the combined distance, so every step a
candidate takes toward a threshold strictly improves its fitness. Averaging
would make the two slopes cancel and the score landscape would turn into a
plateau that hides partial progress from any search.

Outputs live in {1} | (-inf, 0.5): a candidate missing any condition sits
strictly below 0.5, and never in (0.5, 1).
"""

from __future__ import annotations

import numpy as np

from cfx.models.base import Classifier, ModelError


class SyntheticThresholdClassifier(Classifier):
    supports_specialization = False

    def __init__(self, conditions: list[tuple[int, float]], n_features: int,
                 ranges: np.ndarray):
        """conditions: (feature index, threshold); ranges: per-feature observed
        spans used to normalize shortfalls. An empty conjunction is vacuously
        true: every instance is classified good."""
        feats = [f for f, _ in conditions]
        if len(set(feats)) != len(feats):
            raise ModelError("duplicate condition feature")
        for f in feats:
            if not 0 <= f < n_features:
                raise ModelError(f"condition feature {f} out of range")
        self.conditions = list(conditions)
        self.n_features = n_features
        self.cond_feats = np.array(feats, dtype=np.int64)
        self.cond_thresholds = np.array([t for _, t in conditions], dtype=np.float64)
        self.cond_ranges = np.asarray(ranges, dtype=np.float64)[self.cond_feats]

    def optimal_point(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64).copy()
        out[self.cond_feats] = np.maximum(out[self.cond_feats], self.cond_thresholds)
        return out

    def shortfall(self, x: np.ndarray) -> float:
        """Sum of range-normalized per-condition shortfalls; 0 iff x passes."""
        gaps = np.maximum(0.0, self.cond_thresholds - np.asarray(x)[self.cond_feats])
        with np.errstate(divide="ignore", invalid="ignore"):
            deltas = np.where(self.cond_ranges > 0, gaps / self.cond_ranges,
                              (gaps > 0).astype(np.float64))
        return float(np.minimum(deltas, 1.0).sum())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        V = X[:, self.cond_feats]
        sat = (V >= self.cond_thresholds).all(axis=1)
        gaps = np.maximum(0.0, self.cond_thresholds - V)
        with np.errstate(divide="ignore", invalid="ignore"):
            deltas = np.where(self.cond_ranges > 0, gaps / self.cond_ranges,
                              (gaps > 0).astype(np.float64))
        d = np.minimum(deltas, 1.0).sum(axis=1)
        return np.where(sat, 1.0, 0.5 - d)
