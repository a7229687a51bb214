"""2-D embeddings for class-overlap inspection: exact PCA and exact (O(n^2))
symmetric t-SNE with per-row bandwidth found by bisection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PerplexityTooLarge

TSNE_LEARNING_RATE = 200.0
TSNE_EARLY_EXAGGERATION = 12.0
TSNE_MOMENTUM_SWITCH = 250
TSNE_MOMENTUM_EARLY = 0.5
TSNE_MOMENTUM_LATE = 0.8


@dataclass
class Embedding2D:
    coordinates: np.ndarray
    method: str
    diagnostics: dict = field(default_factory=dict)


def pca_2d(rows) -> Embedding2D:
    """Project onto the top-2 covariance eigenvectors (largest loading positive)."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] < 3:
        raise ValueError("PCA needs at least 3 rows")
    centered = rows - rows.mean(axis=0)
    cov = (centered.T @ centered) / rows.shape[0]
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    components = eigenvectors[:, order[:2]].T
    for i in range(2):
        pivot = np.argmax(np.abs(components[i]))
        if components[i, pivot] < 0:
            components[i] = -components[i]
    total = eigenvalues.sum()
    fractions = (eigenvalues[:2] / total) if total > 0 else np.zeros(2)
    return Embedding2D(
        coordinates=centered @ components.T,
        method="pca",
        diagnostics={
            "explained_variance_fraction": [float(f) for f in fractions],
            "components": components,
        },
    )


def _conditional_probabilities(d2: np.ndarray, perplexity: float, tol: float = 1e-3):
    """Per-row Gaussian bandwidths (precision beta) bisected so the realized
    perplexity 2^H matches the target within ``tol``."""
    n = len(d2)
    p_cond = np.zeros((n, n))
    realized = np.empty(n)
    for i in range(n):
        d_row = np.delete(d2[i], i)
        beta_lo, beta_hi = 0.0, np.inf
        beta = 1.0
        for _ in range(200):
            w = np.exp(-d_row * beta)
            total = w.sum()
            if total <= 0:
                perp = 1.0
                p = np.full(n - 1, 1.0 / (n - 1))
            else:
                p = w / total
                nonzero = p > 0
                entropy = -np.sum(p[nonzero] * np.log2(p[nonzero]))
                perp = 2.0**entropy
            if abs(perp - perplexity) < tol:
                break
            if perp > perplexity:
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == np.inf else 0.5 * (beta_lo + beta_hi)
            else:
                beta_hi = beta
                beta = beta / 2.0 if beta_lo == 0.0 else 0.5 * (beta_lo + beta_hi)
        realized[i] = perp
        p_cond[i, np.arange(n) != i] = p
    return p_cond, realized


def tsne_2d(rows, perplexity: float = 30.0, iterations: int = 1000,
            seed: int = 0) -> Embedding2D:
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if perplexity < 5.0:
        raise ValueError("perplexity must be >= 5")
    if perplexity > (n - 1) / 3.0:
        raise PerplexityTooLarge(
            f"perplexity {perplexity} exceeds (n-1)/3 = {(n - 1) / 3.0:.1f}"
        )

    sq = np.sum(rows**2, axis=1)
    d2 = np.maximum(0.0, sq[:, None] + sq[None, :] - 2.0 * (rows @ rows.T))
    p_cond, realized = _conditional_probabilities(d2, perplexity)
    p_joint = (p_cond + p_cond.T) / (2.0 * n)

    rng = np.random.Generator(np.random.PCG64(seed))
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    kl_trace = []
    p_safe = np.maximum(p_joint, 1e-12)

    for it in range(1, iterations + 1):
        target = p_joint * TSNE_EARLY_EXAGGERATION if it <= TSNE_MOMENTUM_SWITCH else p_joint
        ysq = np.sum(y**2, axis=1)
        num = 1.0 / (1.0 + np.maximum(0.0, ysq[:, None] + ysq[None, :] - 2.0 * (y @ y.T)))
        np.fill_diagonal(num, 0.0)
        q = num / num.sum()

        coeff = (target - q) * num
        grad = 4.0 * ((np.diag(coeff.sum(axis=1)) - coeff) @ y)
        momentum = TSNE_MOMENTUM_EARLY if it < TSNE_MOMENTUM_SWITCH else TSNE_MOMENTUM_LATE
        velocity = momentum * velocity - TSNE_LEARNING_RATE * grad
        y = y + velocity
        y = y - y.mean(axis=0)

        q_safe = np.maximum(q, 1e-12)
        kl_trace.append(float(np.sum(p_safe * np.log(p_safe / q_safe))))

    return Embedding2D(
        coordinates=y,
        method="tsne",
        diagnostics={
            "final_kl": kl_trace[-1],
            "kl_trace": kl_trace,
            "realized_perplexity": realized,
            "p_matrix_sum": float(p_joint.sum()),
            "p_joint": p_joint,
        },
    )
