"""Numba-jitted kernels (default backend).

Aggregation order matches numpy_impl exactly: leaf values accumulate in
ascending tree order per row, then divide and clamp. No fastmath anywhere;
the equivalence suite compares predictions bit-for-bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# de Bruijn lookup for count-trailing-zeros on uint64
_DEBRUIJN = np.uint64(0x03F79D71B4CB0A89)
_CTZ_TABLE = np.zeros(64, dtype=np.int64)
for _i in range(64):
    _CTZ_TABLE[(((1 << _i) * 0x03F79D71B4CB0A89) & 0xFFFFFFFFFFFFFFFF) >> 58] = _i


@njit(cache=True)
def _ctz(m):
    return _CTZ_TABLE[((m & (np.uint64(0) - m)) * _DEBRUIJN) >> np.uint64(58)]


@njit(cache=True)
def _first_leaf(words, row, W):
    for w in range(W):
        m = words[row, w]
        if m != np.uint64(0):
            return w * 64 + _ctz(m)
    return 0


@njit(cache=True)
def forest_predict_naive(node_feature, node_threshold, node_left, node_right,
                         node_value, tree_root, X):
    R = X.shape[0]
    T = tree_root.shape[0]
    out = np.empty(R, dtype=np.float64)
    for r in range(R):
        acc = 0.0
        for t in range(T):
            cur = tree_root[t]
            while node_feature[cur] >= 0:
                if X[r, node_feature[cur]] < node_threshold[cur]:
                    cur = node_left[cur]
                else:
                    cur = node_right[cur]
            acc += node_value[cur]
        v = acc / T
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        out[r] = v
    return out


@njit(cache=True)
def qs_predict(feat_off, thr, node_tree, node_mask, init_mask, leaf_off,
               leaf_val, X):
    R = X.shape[0]
    T = init_mask.shape[0]
    W = init_mask.shape[1]
    n = feat_off.shape[0] - 1
    out = np.empty(R, dtype=np.float64)
    masks = np.empty((T, W), dtype=np.uint64)
    for r in range(R):
        for t in range(T):
            for w in range(W):
                masks[t, w] = init_mask[t, w]
        for f in range(n):
            v = X[r, f]
            for j in range(feat_off[f], feat_off[f + 1]):
                if v >= thr[j]:
                    t = node_tree[j]
                    for w in range(W):
                        masks[t, w] &= node_mask[j, w]
                else:
                    break
        acc = 0.0
        for t in range(T):
            leaf = _first_leaf(masks, t, W)
            acc += leaf_val[leaf_off[t] + leaf]
        v = acc / T
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        out[r] = v
    return out


@njit(cache=True)
def qs_fold_features(feat_off, thr, node_tree, node_mask, n_trees, x):
    """Per-feature mask contribution of one instance.

    F[f, t] is the AND of the clearing masks of feature f's failed nodes in
    tree t at x[f] (all-ones where f never fails in t). Any static-feature
    subset folds to AND over its rows, so one pass serves every Δ.
    """
    n = feat_off.shape[0] - 1
    W = node_mask.shape[1]
    ones = ~np.uint64(0)
    F = np.empty((n, n_trees, W), dtype=np.uint64)
    for f in range(n):
        for t in range(n_trees):
            for w in range(W):
                F[f, t, w] = ones
        v = x[f]
        for j in range(feat_off[f], feat_off[f + 1]):
            if v >= thr[j]:
                t = node_tree[j]
                for w in range(W):
                    F[f, t, w] &= node_mask[j, w]
            else:
                break
    return F


@njit(cache=True)
def qs_leaf_values(masks, leaf_off, leaf_val):
    T = masks.shape[0]
    W = masks.shape[1]
    out = np.empty(T, dtype=np.float64)
    for t in range(T):
        leaf = _first_leaf(masks, t, W)
        out[t] = leaf_val[leaf_off[t] + leaf]
    return out


@njit(cache=True)
def qs_predict_specialized(feat_off, thr, node_tree, node_mask, leaf_off,
                           leaf_val, static_mask, static_leaf, touch_pos,
                           touched, cols, feats):
    R = cols.shape[0]
    T = static_leaf.shape[0]
    Tt = touched.shape[0]
    W = static_mask.shape[1]
    K = feats.shape[0]
    out = np.empty(R, dtype=np.float64)
    work = np.empty((Tt, W), dtype=np.uint64)
    for r in range(R):
        for i in range(Tt):
            src = touched[i]
            for w in range(W):
                work[i, w] = static_mask[src, w]
        for k in range(K):
            f = feats[k]
            v = cols[r, k]
            for j in range(feat_off[f], feat_off[f + 1]):
                if v >= thr[j]:
                    tt = touch_pos[node_tree[j]]
                    for w in range(W):
                        work[tt, w] &= node_mask[j, w]
                else:
                    break
        acc = 0.0
        for t in range(T):
            tt = touch_pos[t]
            if tt < 0:
                acc += static_leaf[t]
            else:
                leaf = _first_leaf(work, tt, W)
                acc += leaf_val[leaf_off[t] + leaf]
        v = acc / T
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        out[r] = v
    return out
