"""Random forest of CART trees with bootstrap rows, sqrt-feature splits and
mean-decrease-in-impurity importances."""

from __future__ import annotations

import math

import numpy as np

from .tree import DecisionTree


class RandomForestClassifier:
    """Per-tree seed = master seed + tree index, so fits are reproducible and
    independent of any fitting parallelism."""

    def __init__(self, n_estimators=100, max_depth=None, min_samples_split=2,
                 min_samples_leaf=1, seed=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.seed = seed
        self.trees: list[DecisionTree] = []
        self._importances = None  # populated on fit or on reload

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n, d = X.shape
        max_features = max(1, int(math.isqrt(d)))
        self.trees = []
        for t in range(self.n_estimators):
            rng = np.random.Generator(np.random.PCG64(self.seed + t))
            sample = rng.integers(0, n, size=n)
            tree = DecisionTree(
                task="gini",
                max_depth=self.max_depth,
                min_samples_split=self.min_samples_split,
                min_samples_leaf=self.min_samples_leaf,
                max_features=max_features,
                rng=rng,
            )
            tree.fit(X[sample], y[sample])
            self.trees.append(tree)
        stacked = np.mean([t.raw_importances for t in self.trees], axis=0)
        total = stacked.sum()
        self._importances = stacked / total if total > 0 else stacked
        return self

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict_value(X)
        return total / len(self.trees)

    def mdi_importance(self):
        """Per-feature impurity decrease, averaged over trees, normalized to sum 1."""
        if self._importances is None:
            raise ValueError("forest is not fitted")
        return self._importances
