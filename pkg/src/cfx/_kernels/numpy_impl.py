"""Pure-numpy kernel implementations (reference/fallback path).

Must agree with the numba backend bit-for-bit: per-row tree aggregation runs
in ascending tree order everywhere (vectorized over rows only).
"""

from __future__ import annotations

import numpy as np


def forest_predict_naive(node_feature, node_threshold, node_left, node_right,
                         node_value, tree_root, X):
    """Root-to-leaf traversal per (row, tree); mean of leaf values, clamped."""
    R = X.shape[0]
    T = tree_root.shape[0]
    acc = np.zeros(R, dtype=np.float64)
    rows = np.arange(R)
    for t in range(T):
        cur = np.full(R, tree_root[t], dtype=np.int64)
        while True:
            f = node_feature[cur]
            internal = f >= 0
            if not internal.any():
                break
            idx = rows[internal]
            ci = cur[internal]
            v = X[idx, f[internal]]
            # value < threshold goes left; NaN/inf comparisons are False -> right
            goes_left = v < node_threshold[ci]
            cur[internal] = np.where(goes_left, node_left[ci], node_right[ci])
        acc += node_value[cur]
    out = acc / T
    return np.clip(out, 0.0, 1.0)


def _first_set_bit(words):
    """words: (..., W) uint64 -> index of lowest set bit (assumes one exists)."""
    W = words.shape[-1]
    flat = words.reshape(-1, W)
    out = np.zeros(flat.shape[0], dtype=np.int64)
    found = np.zeros(flat.shape[0], dtype=bool)
    for w in range(W):
        m = flat[:, w]
        hit = (~found) & (m != 0)
        if hit.any():
            lsb = m[hit] & (np.uint64(0) - m[hit])
            bit = np.log2(lsb.astype(np.float64)).astype(np.int64)
            out[hit] = w * 64 + bit
            found[hit] = True
    return out.reshape(words.shape[:-1])


def qs_predict(feat_off, thr, node_tree, node_mask, init_mask, leaf_off,
               leaf_val, X):
    """Mask-based scoring: AND the masks of failed conditions, take the first
    surviving leaf per tree."""
    R = X.shape[0]
    T = init_mask.shape[0]
    n = feat_off.shape[0] - 1
    masks = np.broadcast_to(init_mask, (R,) + init_mask.shape).copy()
    rows = np.arange(R)
    for f in range(n):
        lo, hi = feat_off[f], feat_off[f + 1]
        if lo == hi:
            continue
        v = X[:, f]
        # thresholds ascending: a row fails nodes in the prefix where v >= thr
        cnt = np.searchsorted(thr[lo:hi], v, side="right")
        for j in range(lo, hi):
            active = cnt > (j - lo)
            if not active.any():
                break
            t = node_tree[j]
            masks[active, t, :] &= node_mask[j]
    leaves = _first_set_bit(masks.reshape(R * T, -1)).reshape(R, T)
    vals = leaf_val[leaf_off[:-1][None, :] + leaves]
    acc = np.zeros(R, dtype=np.float64)
    for t in range(T):
        acc += vals[:, t]
    out = acc / T
    return np.clip(out, 0.0, 1.0)


def qs_fold_features(feat_off, thr, node_tree, node_mask, n_trees, x):
    """Per-feature mask contribution of one instance.

    F[f, t] is the AND of the clearing masks of feature f's failed nodes in
    tree t at x[f] (all-ones where f never fails in t). Any static-feature
    subset folds to AND over its rows, so one pass serves every Δ.
    """
    n = feat_off.shape[0] - 1
    W = node_mask.shape[1]
    F = np.full((n, n_trees, W), np.uint64(0xFFFFFFFFFFFFFFFF),
                dtype=np.uint64)
    for f in range(n):
        lo, hi = feat_off[f], feat_off[f + 1]
        if lo == hi:
            continue
        cnt = int(np.searchsorted(thr[lo:hi], x[f], side="right"))
        for j in range(lo, lo + cnt):
            F[f, node_tree[j], :] &= node_mask[j]
    return F


def qs_leaf_values(masks, leaf_off, leaf_val):
    leaves = _first_set_bit(masks)
    return leaf_val[leaf_off[:-1] + leaves]


def qs_predict_specialized(feat_off, thr, node_tree, node_mask, leaf_off,
                           leaf_val, static_mask, static_leaf, touch_pos,
                           touched, cols, feats):
    """Score candidates that differ from the context only at `feats`.

    cols is (R, K) with K == len(feats); touched lists the trees containing
    nodes over `feats`, touch_pos maps tree -> position in that list (-1 if
    untouched).
    """
    R = cols.shape[0]
    T = static_leaf.shape[0]
    Tt = touched.shape[0]
    W = static_mask.shape[1]
    if Tt == 0:
        base = 0.0
        for t in range(T):
            base += static_leaf[t]
        out = np.full(R, min(max(base / T, 0.0), 1.0))
        return out
    work = np.broadcast_to(static_mask[touched], (R, Tt, W)).copy()
    rows = np.arange(R)
    for k in range(feats.shape[0]):
        f = feats[k]
        lo, hi = feat_off[f], feat_off[f + 1]
        if lo == hi:
            continue
        v = cols[:, k]
        cnt = np.searchsorted(thr[lo:hi], v, side="right")
        for j in range(lo, hi):
            active = cnt > (j - lo)
            if not active.any():
                break
            tt = touch_pos[node_tree[j]]
            work[active, tt, :] &= node_mask[j]
    leaves = _first_set_bit(work.reshape(R * Tt, W)).reshape(R, Tt)
    new_vals = leaf_val[leaf_off[touched][None, :] + leaves]
    acc = np.zeros(R, dtype=np.float64)
    for t in range(T):
        tt = touch_pos[t]
        if tt < 0:
            acc += static_leaf[t]
        else:
            acc += new_vals[:, tt]
    out = acc / T
    return np.clip(out, 0.0, 1.0)
