"""Model-agnostic interpretability: exact and permutation-sampled Shapley
attributions, importance rankings, and partial dependence curves.

The exact enumerator doubles as the correctness oracle for the sampler, so
both are model-agnostic by design (any predict function works).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBackground, InvalidFeature, TooManyFeatures

MAX_EXACT_FEATURES = 12
_PREDICT_CHUNK = 65536


@dataclass
class ShapMatrix:
    """Per-row attributions [n x d] plus the background expectation."""

    attributions: np.ndarray
    base_value: float
    background_fingerprint: str = ""


@dataclass
class PdpCurve:
    feature_index: int
    feature_name: str
    grid: np.ndarray
    response: np.ndarray


def background_fingerprint(background: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(background).tobytes()).hexdigest()[:16]


def _predict_batched(predict_fn, rows: np.ndarray) -> np.ndarray:
    out = np.empty(len(rows))
    for start in range(0, len(rows), _PREDICT_CHUNK):
        out[start : start + _PREDICT_CHUNK] = predict_fn(rows[start : start + _PREDICT_CHUNK])
    return out


def shapley_exact(predict_fn, x, background, active_features=None):
    """Exact Shapley values by coalition enumeration over the active features.

    Features outside ``active_features`` are held at background values. Returns
    (phi, base_value) where phi has one entry per column of x (zeros for
    inactive features).
    """
    x = np.asarray(x, dtype=np.float64)
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if background.size == 0:
        raise EmptyBackground("background set is empty")
    d_total = x.shape[-1]
    active = list(range(d_total)) if active_features is None else list(active_features)
    d = len(active)
    if d > MAX_EXACT_FEATURES:
        raise TooManyFeatures(
            f"{d} active features exceed the exact-enumeration limit "
            f"of {MAX_EXACT_FEATURES}"
        )

    n_bg = len(background)
    n_subsets = 1 << d
    # build one row block per coalition: background with coalition features from x
    rows = np.tile(background, (n_subsets, 1))
    for mask in range(n_subsets):
        block = rows[mask * n_bg : (mask + 1) * n_bg]
        for bit, j in enumerate(active):
            if mask >> bit & 1:
                block[:, j] = x[j]
    values = _predict_batched(predict_fn, rows).reshape(n_subsets, n_bg).mean(axis=1)

    fact = [math.factorial(i) for i in range(d + 1)]
    weights = [fact[s] * fact[d - s - 1] / fact[d] for s in range(d)]
    phi = np.zeros(d_total)
    for bit, j in enumerate(active):
        member = 1 << bit
        for mask in range(n_subsets):
            if mask & member:
                continue
            size = bin(mask).count("1")
            phi[j] += weights[size] * (values[mask | member] - values[mask])
    return phi, float(values[0])


def shapley_sampled(predict_fn, x, background, n_permutations=2000, seed=0):
    """Permutation-sampling Shapley estimate (one background row per permutation),
    shifted so the efficiency axiom holds exactly against the full-background base."""
    x = np.asarray(x, dtype=np.float64)
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    if background.size == 0:
        raise EmptyBackground("background set is empty")
    if n_permutations < 100:
        raise ValueError("n_permutations must be >= 100")
    d = x.shape[-1]
    rng = np.random.Generator(np.random.PCG64(seed))

    perms = np.array([rng.permutation(d) for _ in range(n_permutations)])
    bg_rows = background[rng.integers(0, len(background), size=n_permutations)]

    # prefix chains: row t takes the first t features of the permutation from x;
    # rank[p, j] = position of feature j within permutation p
    rank = np.argsort(perms, axis=1)
    from_x = rank[:, None, :] < np.arange(d + 1)[None, :, None]
    rows = np.where(from_x, x[None, None, :], bg_rows[:, None, :])

    values = _predict_batched(predict_fn, rows.reshape(-1, d))
    values = values.reshape(n_permutations, d + 1)
    marginals = np.diff(values, axis=1)

    phi = np.zeros(d)
    np.add.at(phi, perms.ravel(), marginals.ravel())
    phi /= n_permutations

    base = float(_predict_batched(predict_fn, background).mean())
    fx = float(_predict_batched(predict_fn, x.reshape(1, -1))[0])
    phi += (fx - base - phi.sum()) / d
    return phi, base


def shap_matrix(predict_fn, X, background, n_permutations=2000, seed=0) -> ShapMatrix:
    """Sampled attributions for every row of X (per-row derived seeds)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    attributions = np.empty_like(X)
    base = 0.0
    for i, row in enumerate(X):
        attributions[i], base = shapley_sampled(
            predict_fn, row, background, n_permutations, seed + i
        )
    return ShapMatrix(
        attributions=attributions,
        base_value=base,
        background_fingerprint=background_fingerprint(background),
    )


def shap_summary(attributions: np.ndarray, feature_names) -> list[dict]:
    """Features ranked by mean |attribution|; ties keep schema order."""
    attributions = np.atleast_2d(np.asarray(attributions, dtype=np.float64))
    scores = np.abs(attributions).mean(axis=0)
    order = np.argsort(-scores, kind="stable")
    return [
        {"feature": feature_names[i], "index": int(i), "mean_abs_shap": float(scores[i])}
        for i in order
    ]


def partial_dependence(predict_fn, rows, feature_index, n_grid=50,
                       feature_name=None) -> PdpCurve:
    """Mean model response as one feature sweeps its 1st..99th percentile range."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.size == 0:
        raise InvalidFeature("table must be nonempty")
    if not 0 <= feature_index < rows.shape[1]:
        raise InvalidFeature(f"feature index {feature_index} out of range")
    lo, hi = np.percentile(rows[:, feature_index], [1.0, 99.0])
    grid = np.array([lo]) if lo == hi else np.linspace(lo, hi, n_grid)

    stacked = np.repeat(rows[None, :, :], len(grid), axis=0)
    stacked[:, :, feature_index] = grid[:, None]
    response = _predict_batched(predict_fn, stacked.reshape(-1, rows.shape[1]))
    response = response.reshape(len(grid), len(rows)).mean(axis=1)
    return PdpCurve(
        feature_index=int(feature_index),
        feature_name=feature_name or f"f{feature_index}",
        grid=grid,
        response=response,
    )
