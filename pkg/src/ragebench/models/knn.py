"""K-nearest-neighbour classifier with vote-fraction probabilities."""

from __future__ import annotations

import numpy as np

from ..errors import KExceedsN

_QUERY_CHUNK = 256


class KnnClassifier:
    """Euclidean KNN; p = fraction of class-1 labels among the k nearest.

    Distance ties resolve to the lower training index (stable sort).
    """

    def __init__(self, k=5):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.train_x = None
        self.train_y = None

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if self.k > len(X):
            raise KExceedsN(f"k={self.k} exceeds {len(X)} training rows")
        self.train_x = X
        self.train_y = y
        return self

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty(len(X))
        for start in range(0, len(X), _QUERY_CHUNK):
            chunk = X[start : start + _QUERY_CHUNK]
            diff = chunk[:, None, :] - self.train_x[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            nearest = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
            out[start : start + len(chunk)] = self.train_y[nearest].mean(axis=1)
        return out
