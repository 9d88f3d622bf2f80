"""Instance distance and search score.

Per-feature deltas live in [0, 1]: categorical features use a 0/1 indicator,
numeric (ordinal/continuous) features use |x - y| / w where w is the feature's
observed range in the dataset, clamped to 1 for out-of-domain values. A
feature whose observed range is degenerate (w == 0) falls back to the 0/1
indicator.

The combined distance mixes three norms over the delta vector:

    dist = alpha * l0 / n  +  beta * l1 / n  +  gamma * linf

(l0 = count of non-zero deltas, l1 = their sum, linf = their max; linf is not
divided by n). The search score adds a constant penalty plus the classifier
margin for candidates that are not yet counterfactual, which keeps every
counterfactual strictly fitter than every non-counterfactual:

    score = dist                       if m > 0.5
          = (dist + 1) + (1 - m)       otherwise
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cfx.schema import KIND_CAT


@dataclass(frozen=True)
class DistanceParams:
    """Norm weights; must be non-negative and sum to 1 (within 1e-12)."""

    alpha: float = 0.0
    beta: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be a finite non-negative number")
        total = self.alpha + self.beta + self.gamma
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"alpha + beta + gamma must be 1, got {total}")


def feature_deltas(x: np.ndarray, Y: np.ndarray, kind_codes: np.ndarray,
                   ranges: np.ndarray) -> np.ndarray:
    """Per-feature deltas between x (n,) and Y ((R, n) or (n,)); same shape as Y."""
    Y = np.asarray(Y, dtype=np.float64)
    diff = Y != x
    is_cat = kind_codes == KIND_CAT
    degenerate = ranges <= 0.0
    indicator = is_cat | degenerate
    out = np.empty_like(Y, dtype=np.float64)
    safe_w = np.where(indicator, 1.0, ranges)
    np.divide(np.abs(Y - x), safe_w, out=out)
    np.minimum(out, 1.0, out=out)
    return np.where(indicator, diff.astype(np.float64), out)


def delta_components(deltas: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(l0, l1, linf) along the last axis of a delta array."""
    l0 = np.count_nonzero(deltas, axis=-1).astype(np.float64)
    l1 = np.sum(deltas, axis=-1)
    if deltas.shape[-1] == 0:
        shape = deltas.shape[:-1]
        linf = np.zeros(shape, dtype=np.float64)
    else:
        linf = np.max(deltas, axis=-1)
    return l0, l1, linf


def combine_components(l0, l1, linf, n_features: int, params: DistanceParams):
    return (params.alpha * l0 + params.beta * l1) / n_features + params.gamma * linf


def dist(x: np.ndarray, y: np.ndarray, kind_codes: np.ndarray, ranges: np.ndarray,
         params: DistanceParams = DistanceParams()) -> float:
    d = feature_deltas(x, np.asarray(y, dtype=np.float64), kind_codes, ranges)
    l0, l1, linf = delta_components(d)
    return float(combine_components(l0, l1, linf, x.shape[0], params))


def dist_batch(x: np.ndarray, Y: np.ndarray, kind_codes: np.ndarray, ranges: np.ndarray,
               params: DistanceParams = DistanceParams()) -> np.ndarray:
    d = feature_deltas(x, Y, kind_codes, ranges)
    l0, l1, linf = delta_components(d)
    return combine_components(l0, l1, linf, x.shape[0], params)


def score(d: float, m: float) -> float:
    """Search score for one candidate with distance d and prediction m."""
    if m > 0.5:
        return d
    return (d + 1.0) + (1.0 - m)


def score_batch(d: np.ndarray, m: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    return np.where(m > 0.5, d, d + 2.0 - m)
