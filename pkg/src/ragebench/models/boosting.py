"""Gradient boosting with logistic loss and depth-limited regression trees."""

from __future__ import annotations

import numpy as np

from ..errors import SingleClassTraining
from .tree import DecisionTree


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class GradientBoostingClassifier:
    """Trees fit the negative gradient (residual y - p); leaf values are the
    Newton step sum(residual) / sum(p(1-p)). Initial score is the log-odds of
    the training base rate."""

    def __init__(self, n_rounds=100, learning_rate=0.1, max_depth=3):
        self.n_rounds = n_rounds
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.f0 = 0.0
        self.trees: list[DecisionTree] = []
        self.loss_trace: list[float] = []

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        base = y.mean()
        if base <= 0.0 or base >= 1.0:
            raise SingleClassTraining("gradient boosting needs both classes present")
        self.f0 = float(np.log(base / (1.0 - base)))
        self.trees = []
        self.loss_trace = []

        scores = np.full(len(y), self.f0)
        self.loss_trace.append(self._log_loss(y, _sigmoid(scores)))
        for _ in range(self.n_rounds):
            p = _sigmoid(scores)
            residual = y - p
            tree = DecisionTree(task="mse", max_depth=self.max_depth,
                                min_samples_split=2, min_samples_leaf=1)
            tree.fit(X, residual)
            self._newton_leaf_values(tree, X, residual, p)
            scores += self.learning_rate * tree.predict_value(X)
            self.trees.append(tree)
            self.loss_trace.append(self._log_loss(y, _sigmoid(scores)))
        return self

    @staticmethod
    def _newton_leaf_values(tree, X, residual, p):
        leaves = tree.apply(X)
        hessian = p * (1.0 - p)
        for leaf in np.unique(leaves):
            members = leaves == leaf
            h = hessian[members].sum()
            tree.value[leaf] = residual[members].sum() / h if h > 1e-12 else 0.0

    @staticmethod
    def _log_loss(y, p):
        p = np.clip(p, 1e-15, 1.0 - 1e-15)
        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        scores = np.full(len(X), self.f0)
        for tree in self.trees:
            scores += self.learning_rate * tree.predict_value(X)
        return scores

    def predict_proba(self, X):
        return _sigmoid(self.decision(X))
