"""Tree ensembles: naive traversal, mask-based scoring, and specialization.

Convention fixed across the package: an internal node tests `value <
threshold` and the true branch goes left. The mask scorer stores, per decision
node, a bitmask over the tree's leaves with the left subtree's bits cleared:
ANDing the masks of all failed conditions leaves exactly the reachable leaves
set, and the lowest set bit is the leaf naive traversal reaches.

Prediction is the mean of per-tree leaf values, accumulated in ascending tree
order (all code paths share that order so scores compare bit-for-bit), clamped
to [0, 1].
"""

from __future__ import annotations

import numpy as np

from cfx import _kernels
from cfx.models.base import Classifier, CodeTranslator, ModelError, SpecializedClassifier


class TreeEnsembleClassifier(Classifier):
    supports_specialization = True

    def __init__(self, trees: list[dict], n_features: int,
                 translator: CodeTranslator | None = None):
        """trees: [{"nodes": [ {feature,threshold,left,right} | {leaf} ]}]."""
        if not trees:
            raise ModelError("empty ensemble")
        self.n_features = n_features
        self.translator = translator or CodeTranslator.identity(n_features)
        self._build(trees)
        self._compile_masks()
        # last (translated x, per-feature fold masks); explain sessions and
        # sequential service requests reuse one context many times
        self._fold_cache: tuple[bytes, np.ndarray] | None = None

    # --- construction ------------------------------------------------------

    def _build(self, trees: list[dict]) -> None:
        feats, thrs, lefts, rights, values, roots = [], [], [], [], [], []
        offset = 0
        self.max_depth = 0
        for ti, tree in enumerate(trees):
            nodes = tree.get("nodes")
            if not isinstance(nodes, list) or not nodes:
                raise ModelError(f"tree {ti}: missing or empty node list")
            roots.append(offset)
            for ni, node in enumerate(nodes):
                if "leaf" in node:
                    v = float(node["leaf"])
                    if not 0.0 <= v <= 1.0:
                        raise ModelError(f"tree {ti} node {ni}: leaf value {v} outside [0, 1]")
                    feats.append(-1)
                    thrs.append(0.0)
                    lefts.append(-1)
                    rights.append(-1)
                    values.append(v)
                else:
                    try:
                        f = int(node["feature"])
                        t = float(node["threshold"])
                        l = int(node["left"])
                        r = int(node["right"])
                    except (KeyError, TypeError, ValueError):
                        raise ModelError(
                            f"tree {ti} node {ni}: expected feature/threshold/left/right"
                        ) from None
                    if not 0 <= f < self.n_features:
                        raise ModelError(f"tree {ti} node {ni}: feature index {f} out of range")
                    if not np.isfinite(t):
                        raise ModelError(f"tree {ti} node {ni}: non-finite threshold")
                    for child in (l, r):
                        if not 0 <= child < len(nodes):
                            raise ModelError(f"tree {ti} node {ni}: child index {child} invalid")
                    feats.append(f)
                    thrs.append(t)
                    lefts.append(offset + l)
                    rights.append(offset + r)
                    values.append(0.0)
            # structural check: every node reached exactly once from the root
            seen = set()
            depth = self._check_tree(0, nodes, ni_seen=seen, ti=ti)
            if len(seen) != len(nodes):
                raise ModelError(f"tree {ti}: {len(nodes) - len(seen)} unreachable node(s)")
            self.max_depth = max(self.max_depth, depth)
            offset += len(nodes)
        self.node_feature = np.array(feats, dtype=np.int64)
        self.node_threshold = np.array(thrs, dtype=np.float64)
        self.node_left = np.array(lefts, dtype=np.int64)
        self.node_right = np.array(rights, dtype=np.int64)
        self.node_value = np.array(values, dtype=np.float64)
        self.tree_root = np.array(roots, dtype=np.int64)
        self.n_trees = len(roots)

    def _check_tree(self, idx: int, nodes: list, ni_seen: set, ti: int, depth: int = 0) -> int:
        if idx in ni_seen:
            raise ModelError(f"tree {ti}: node {idx} reachable twice (not a tree)")
        if depth > 64:
            raise ModelError(f"tree {ti}: depth exceeds 64 (cycle?)")
        ni_seen.add(idx)
        node = nodes[idx]
        if "leaf" in node:
            return depth
        dl = self._check_tree(int(node["left"]), nodes, ni_seen, ti, depth + 1)
        dr = self._check_tree(int(node["right"]), nodes, ni_seen, ti, depth + 1)
        return max(dl, dr)

    def _compile_masks(self) -> None:
        """QuickScorer-style layout: per feature, nodes sorted by threshold
        ascending; per node, a mask clearing the left subtree's leaves."""
        T = self.n_trees
        leaf_counts = np.zeros(T, dtype=np.int64)
        leaf_index = np.full(self.node_feature.shape[0], -1, dtype=np.int64)
        left_span: list[tuple[int, int, int]] = []  # (node, leaf_lo, leaf_hi) per internal

        node_tree = np.zeros(self.node_feature.shape[0], dtype=np.int64)
        for t in range(T):
            lo = self.tree_root[t]
            hi = self.tree_root[t + 1] if t + 1 < T else self.node_feature.shape[0]
            node_tree[lo:hi] = t

        entries = []  # (feature, threshold, tree, mask_words)
        max_leaves = 0
        leaf_vals: list[float] = []
        leaf_off = np.zeros(T + 1, dtype=np.int64)
        for t in range(T):
            # in-order leaf numbering via explicit stack
            order: list[int] = []
            spans: dict[int, tuple[int, int]] = {}

            def assign(idx: int) -> tuple[int, int]:
                if self.node_feature[idx] < 0:
                    pos = len(order)
                    order.append(idx)
                    return pos, pos + 1
                l_lo, l_hi = assign(self.node_left[idx])
                r_lo, r_hi = assign(self.node_right[idx])
                spans[idx] = (l_lo, l_hi)  # left subtree's leaf range
                return l_lo, r_hi

            assign(int(self.tree_root[t]))
            L = len(order)
            max_leaves = max(max_leaves, L)
            leaf_off[t + 1] = leaf_off[t] + L
            leaf_vals.extend(self.node_value[i] for i in order)
            leaf_counts[t] = L
            for idx, (lo_, hi_) in spans.items():
                entries.append((int(self.node_feature[idx]),
                                float(self.node_threshold[idx]), t, lo_, hi_, L))

        W = max(1, (int(max_leaves) + 63) // 64)
        self.qs_words = W
        self.qs_leaf_off = leaf_off
        self.qs_leaf_val = np.array(leaf_vals, dtype=np.float64)
        init = np.zeros((T, W), dtype=np.uint64)
        for t in range(T):
            L = int(leaf_counts[t])
            for w in range(W):
                bits_here = min(64, max(0, L - w * 64))
                if bits_here == 64:
                    init[t, w] = np.uint64(0xFFFFFFFFFFFFFFFF)
                elif bits_here > 0:
                    init[t, w] = np.uint64((1 << bits_here) - 1)
        self.qs_init_mask = init

        entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
        M = len(entries)
        self.qs_feat_off = np.zeros(self.n_features + 1, dtype=np.int64)
        self.qs_thr = np.zeros(M, dtype=np.float64)
        self.qs_tree = np.zeros(M, dtype=np.int64)
        self.qs_mask = np.zeros((M, W), dtype=np.uint64)
        for j, (f, thr, t, lo_, hi_, L) in enumerate(entries):
            self.qs_thr[j] = thr
            self.qs_tree[j] = t
            mask = init[t].copy()
            for leaf in range(lo_, hi_):
                mask[leaf // 64] &= ~np.uint64(1 << (leaf % 64))
            self.qs_mask[j] = mask
            self.qs_feat_off[f + 1] += 1
        np.cumsum(self.qs_feat_off, out=self.qs_feat_off)
        self.qs_feat_trees = [
            np.unique(self.qs_tree[self.qs_feat_off[f]:self.qs_feat_off[f + 1]])
            for f in range(self.n_features)
        ]

    # --- prediction --------------------------------------------------------

    def predict_naive(self, X: np.ndarray) -> np.ndarray:
        """Root-to-leaf traversal; the oracle the mask scorer is checked against."""
        Xm = self.translator.translate(np.asarray(X, dtype=np.float64))
        return _kernels.forest_predict_naive(
            self.node_feature, self.node_threshold, self.node_left,
            self.node_right, self.node_value, self.tree_root, Xm,
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        Xm = self.translator.translate(np.ascontiguousarray(X, dtype=np.float64))
        return _kernels.qs_predict(
            self.qs_feat_off, self.qs_thr, self.qs_tree, self.qs_mask,
            self.qs_init_mask, self.qs_leaf_off, self.qs_leaf_val, Xm,
        )

    # --- specialization ----------------------------------------------------

    def _fold_table(self, xm: np.ndarray) -> np.ndarray:
        key = xm.tobytes()
        if self._fold_cache is None or self._fold_cache[0] != key:
            F = _kernels.qs_fold_features(self.qs_feat_off, self.qs_thr,
                                          self.qs_tree, self.qs_mask,
                                          self.n_trees, xm)
            self._fold_cache = (key, F)
        return self._fold_cache[1]

    def specialize(self, x: np.ndarray, changed_feats: np.ndarray) -> "SpecializedForest":
        return SpecializedForest(self, np.asarray(x, dtype=np.float64),
                                 np.asarray(changed_feats, dtype=np.int64))


class SpecializedForest(SpecializedClassifier):
    """Ensemble with all static-feature decisions pre-folded for one context."""

    def __init__(self, parent: TreeEnsembleClassifier, x: np.ndarray,
                 changed_feats: np.ndarray):
        self.parent = parent
        self.changed_feats = changed_feats
        xm = parent.translator.translate_row(x)
        is_static = np.ones(parent.n_features, dtype=np.bool_)
        is_static[changed_feats] = False
        F = parent._fold_table(xm)
        masks = parent.qs_init_mask.copy()
        static_ids = np.nonzero(is_static)[0]
        if len(static_ids):
            np.bitwise_and(np.bitwise_and.reduce(F[static_ids], axis=0),
                           masks, out=masks)
        self.static_mask = masks
        self.static_leaf = _kernels.qs_leaf_values(
            masks, parent.qs_leaf_off, parent.qs_leaf_val)
        seen = np.zeros(parent.n_trees, dtype=np.bool_)
        for f in changed_feats:
            seen[parent.qs_feat_trees[f]] = True
        self.touched = np.nonzero(seen)[0].astype(np.int64)
        self.touch_pos = np.full(parent.n_trees, -1, dtype=np.int64)
        self.touch_pos[self.touched] = np.arange(len(self.touched), dtype=np.int64)

    def predict_partial(self, cols: np.ndarray) -> np.ndarray:
        p = self.parent
        colsm = p.translator.translate_cols(
            np.ascontiguousarray(cols, dtype=np.float64), self.changed_feats
        )
        return _kernels.qs_predict_specialized(
            p.qs_feat_off, p.qs_thr, p.qs_tree, p.qs_mask, p.qs_leaf_off,
            p.qs_leaf_val, self.static_mask, self.static_leaf, self.touch_pos,
            self.touched, colsm, self.changed_feats,
        )
