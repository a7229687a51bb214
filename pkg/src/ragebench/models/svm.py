"""Soft-margin SVM solved by sequential minimal optimization (simplified SMO).

Hitting the pass limit is a warning, not a failure: the model is returned
with ``converged=False`` so grid searches stay total.
"""

from __future__ import annotations

import numpy as np

MAX_PASSES = 10_000
KKT_TOL = 1e-3


def kernel_matrix(kind, gamma, A, B):
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if kind == "linear":
        return A @ B.T
    if kind == "rbf":
        a2 = np.sum(A**2, axis=1)[:, None]
        b2 = np.sum(B**2, axis=1)[None, :]
        d2 = np.maximum(0.0, a2 + b2 - 2.0 * (A @ B.T))
        return np.exp(-gamma * d2)
    raise ValueError(f"unknown kernel {kind!r}")


class SvmClassifier:
    def __init__(self, kernel="rbf", c=1.0, gamma=0.1, seed=0,
                 tol=KKT_TOL, max_passes=MAX_PASSES):
        if c <= 0:
            raise ValueError("C must be positive")
        if kernel == "rbf" and gamma <= 0:
            raise ValueError("gamma must be positive for the rbf kernel")
        self.kernel = kernel
        self.c = c
        self.gamma = gamma
        self.seed = seed
        self.tol = tol
        self.max_passes = max_passes
        self.train_x = None
        self.y_signed = None
        self.alpha = None
        self.b = 0.0
        self.converged = False

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = len(X)
        ys = np.where(y == 1, 1.0, -1.0)
        K = kernel_matrix(self.kernel, self.gamma, X, X)
        rng = np.random.Generator(np.random.PCG64(self.seed))

        alpha = np.zeros(n)
        b = 0.0
        c = self.c
        self.converged = False
        for _ in range(self.max_passes):
            changed = 0
            for i in range(n):
                e_i = (alpha * ys) @ K[:, i] + b - ys[i]
                r_i = ys[i] * e_i
                if not ((r_i < -self.tol and alpha[i] < c) or (r_i > self.tol and alpha[i] > 0)):
                    continue
                j = int(rng.integers(0, n - 1))
                if j >= i:
                    j += 1
                e_j = (alpha * ys) @ K[:, j] + b - ys[j]

                a_i_old, a_j_old = alpha[i], alpha[j]
                if ys[i] != ys[j]:
                    lo, hi = max(0.0, a_j_old - a_i_old), min(c, c + a_j_old - a_i_old)
                else:
                    lo, hi = max(0.0, a_i_old + a_j_old - c), min(c, a_i_old + a_j_old)
                if lo >= hi:
                    continue
                eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
                if eta >= 0:
                    continue
                a_j = np.clip(a_j_old - ys[j] * (e_i - e_j) / eta, lo, hi)
                if abs(a_j - a_j_old) < 1e-7:
                    continue
                a_i = a_i_old + ys[i] * ys[j] * (a_j_old - a_j)
                alpha[i], alpha[j] = a_i, a_j

                b1 = b - e_i - ys[i] * (a_i - a_i_old) * K[i, i] \
                    - ys[j] * (a_j - a_j_old) * K[i, j]
                b2 = b - e_j - ys[i] * (a_i - a_i_old) * K[i, j] \
                    - ys[j] * (a_j - a_j_old) * K[j, j]
                if 0 < a_i < c:
                    b = b1
                elif 0 < a_j < c:
                    b = b2
                else:
                    b = 0.5 * (b1 + b2)
                changed += 1
            if changed == 0:
                self.converged = True
                break

        self.train_x = X
        self.y_signed = ys
        self.alpha = alpha
        self.b = float(b)
        return self

    def decision(self, X):
        K = kernel_matrix(self.kernel, self.gamma, self.train_x, X)
        return (self.alpha * self.y_signed) @ K + self.b

    def predict(self, X):
        return (self.decision(X) > 0).astype(np.int64)

    def kkt_violation(self):
        """Worst KKT violation over training points (0 when within tolerance)."""
        margins = self.y_signed * self.decision(self.train_x)
        worst = 0.0
        for a, m in zip(self.alpha, margins):
            if a < 1e-12:
                worst = max(worst, 1.0 - m)  # should have margin >= 1
            elif a > self.c - 1e-12:
                worst = max(worst, m - 1.0)  # should have margin <= 1
            else:
                worst = max(worst, abs(m - 1.0))
        return worst
