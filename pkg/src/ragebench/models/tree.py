"""CART trees (Gini classification / variance-reduction regression) stored as
flat arrays so batched prediction is a vectorized descent."""

from __future__ import annotations

import numpy as np

_LEAF = -1


class DecisionTree:
    """Binary CART. task="gini" grows on 0/1 labels with leaf class-1 fractions;
    task="mse" grows on real targets with leaf means.

    max_features, when set, draws that many candidate features per split from
    ``rng`` (the random-forest feature subsample).
    """

    def __init__(self, task="gini", max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, max_features=None, rng=None):
        self.task = task
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.rng = rng
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.value = None
        self.raw_importances = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n, d = X.shape
        feature, threshold, left, right, value = [], [], [], [], []
        self.raw_importances = np.zeros(d)

        # (row_indices, depth, slot) work list; slot -1 means root
        stack = [(np.arange(n), 0, -1, False)]
        while stack:
            idx, depth, parent, is_right = stack.pop()
            node_id = len(feature)
            if parent >= 0:
                if is_right:
                    right[parent] = node_id
                else:
                    left[parent] = node_id
            feature.append(_LEAF)
            threshold.append(0.0)
            left.append(_LEAF)
            right.append(_LEAF)
            value.append(float(y[idx].mean()))

            if (self.max_depth is not None and depth >= self.max_depth) or \
                    len(idx) < self.min_samples_split:
                continue
            split = self._best_split(X, y, idx)
            if split is None:
                continue
            f, thr, gain, left_idx, right_idx = split
            feature[node_id] = f
            threshold[node_id] = thr
            self.raw_importances[f] += gain * len(idx) / n
            # push right first so the left child is materialized next (stable ids)
            stack.append((right_idx, depth + 1, node_id, True))
            stack.append((left_idx, depth + 1, node_id, False))

        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value)
        return self

    def _impurity(self, y):
        if self.task == "gini":
            p = y.mean()
            return 2.0 * p * (1.0 - p)
        return y.var()

    def _best_split(self, X, y, idx):
        n = len(idx)
        parent_impurity = self._impurity(y[idx])
        if parent_impurity <= 0.0:
            return None
        d = X.shape[1]
        if self.max_features is not None and self.max_features < d:
            candidates = self.rng.permutation(d)
            budget = self.max_features
        else:
            candidates = np.arange(d)
            budget = d

        msl = self.min_samples_leaf
        best = None  # (cost, feature, threshold, k, order)
        y_node = y[idx]
        ks = np.arange(1, n)
        for f in candidates:
            if budget == 0:
                break
            xs_raw = X[idx, f]
            order = np.argsort(xs_raw, kind="stable")
            xs = xs_raw[order]
            ys = y_node[order]
            valid = (xs[1:] > xs[:-1]) & (ks >= msl) & (n - ks >= msl)
            if not valid.any():
                # constant (or unsplittable) feature: does not consume budget,
                # mirroring the usual CART splitter fallback
                continue
            budget -= 1
            if self.task == "gini":
                left_pos = np.cumsum(ys)[:-1]
                pl = left_pos / ks
                pr = (left_pos[-1] + ys[-1] - left_pos) / (n - ks)
                cost = ks * 2.0 * pl * (1.0 - pl) + (n - ks) * 2.0 * pr * (1.0 - pr)
            else:
                csum = np.cumsum(ys)[:-1]
                csq = np.cumsum(ys**2)[:-1]
                total_sum = csum[-1] + ys[-1]
                total_sq = csq[-1] + ys[-1] ** 2
                var_l = csq / ks - (csum / ks) ** 2
                var_r = (total_sq - csq) / (n - ks) - ((total_sum - csum) / (n - ks)) ** 2
                cost = ks * var_l + (n - ks) * var_r
            cost = cost / n
            cost[~valid] = np.inf
            k = int(np.argmin(cost))
            if best is None or cost[k] < best[0]:
                best = (cost[k], int(f), 0.5 * (xs[k] + xs[k + 1]), k + 1, order)

        if best is None or not np.isfinite(best[0]):
            return None
        cost, f, thr, k, order = best
        # zero-gain splits are allowed (they still shrink the node), so e.g.
        # XOR-structured data gets isolated by the grandchildren
        gain = max(0.0, parent_impurity - cost)
        return f, thr, gain, idx[order[:k]], idx[order[k:]]

    def apply(self, X):
        """Leaf node index for each row."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return node
            rows = np.nonzero(internal)[0]
            go_left = X[rows, feat[internal]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict_value(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d, task="gini"):
        tree = cls(task=task)
        tree.feature = np.array(d["feature"], dtype=np.int64)
        tree.threshold = np.array(d["threshold"])
        tree.left = np.array(d["left"], dtype=np.int64)
        tree.right = np.array(d["right"], dtype=np.int64)
        tree.value = np.array(d["value"])
        return tree
