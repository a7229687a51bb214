"""Probability calibrators: Platt sigmoid scaling and isotonic regression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SingleClassCalibration

_CLIP = 1e-6
_MIN_PAIRS = 10


@dataclass
class Calibrator:
    """Monotone non-decreasing score -> probability map.

    platt: p = 1 / (1 + exp(A*s + B)) with A < 0 for positively-oriented scores.
    isotonic: step function (block score thresholds -> block values).
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    thresholds: np.ndarray = field(default_factory=lambda: np.array([]))
    values: np.ndarray = field(default_factory=lambda: np.array([]))

    def apply(self, scores):
        scores = np.atleast_1d(np.asarray(scores, dtype=np.float64))
        if self.kind == "platt":
            z = np.clip(self.a * scores + self.b, -500, 500)
            p = 1.0 / (1.0 + np.exp(z))
        else:
            if self.thresholds.size == 0:
                raise ValueError("isotonic calibrator is empty")
            idx = np.clip(np.searchsorted(self.thresholds, scores, side="right") - 1,
                          0, len(self.values) - 1)
            p = self.values[idx]
        return np.clip(p, _CLIP, 1.0 - _CLIP)

    def to_dict(self):
        if self.kind == "platt":
            return {"kind": "platt", "a": self.a, "b": self.b}
        return {"kind": "isotonic", "thresholds": self.thresholds.tolist(),
                "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        if d["kind"] == "platt":
            return cls(kind="platt", a=d["a"], b=d["b"])
        return cls(kind="isotonic", thresholds=np.array(d["thresholds"]),
                   values=np.array(d["values"]))


def calibrate_fit(scores, labels, kind) -> Calibrator:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    if len(scores) < _MIN_PAIRS:
        raise ValueError(f"calibration needs >= {_MIN_PAIRS} pairs, got {len(scores)}")
    if len(np.unique(labels)) < 2:
        raise SingleClassCalibration("calibration needs both classes present")
    if kind == "platt":
        a, b = _fit_platt(scores, labels)
        return Calibrator(kind="platt", a=a, b=b)
    if kind == "isotonic":
        thresholds, values = _fit_isotonic(scores, labels)
        return Calibrator(kind="isotonic", thresholds=thresholds, values=values)
    raise ValueError(f"unknown calibrator kind {kind!r}")


def _fit_platt(scores, labels, max_iter=100):
    """Newton iterations with backtracking on the smoothed log-loss
    (Platt's +1/+2 target regularization)."""
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(labels == 1, hi, lo)

    a = 0.0
    b = float(np.log((n_neg + 1.0) / (n_pos + 1.0)))

    def loss(av, bv):
        z = av * scores + bv
        # -sum t*log(p) + (1-t)*log(1-p) with p = sigmoid(-z), written stably
        return float(np.sum(np.logaddexp(0.0, -z) + t * z))

    current = loss(a, b)
    for _ in range(max_iter):
        z = np.clip(a * scores + b, -500, 500)
        p = 1.0 / (1.0 + np.exp(z))
        grad = t - p
        g_a = float(np.sum(scores * grad))
        g_b = float(np.sum(grad))
        if abs(g_a) < 1e-10 and abs(g_b) < 1e-10:
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        h_aa = float(np.sum(scores * scores * w)) + 1e-12
        h_ab = float(np.sum(scores * w))
        h_bb = float(np.sum(w)) + 1e-12
        det = h_aa * h_bb - h_ab * h_ab
        if det <= 0:
            break
        step_a = -(h_bb * g_a - h_ab * g_b) / det
        step_b = -(h_aa * g_b - h_ab * g_a) / det
        scale = 1.0
        for _ in range(40):
            trial = loss(a + scale * step_a, b + scale * step_b)
            if trial < current:
                a += scale * step_a
                b += scale * step_b
                current = trial
                break
            scale *= 0.5
        else:
            break
    return a, b


def _fit_isotonic(scores, labels):
    """Pool-adjacent-violators over score-sorted label means (tied scores pooled)."""
    order = np.argsort(scores, kind="stable")
    xs = scores[order]
    ys = labels[order].astype(np.float64)

    # merge duplicate scores first so the fitted map is a function of the score
    uniq, starts = np.unique(xs, return_index=True)
    block_x = []
    block_sum = []
    block_n = []
    bounds = list(starts) + [len(xs)]
    for i in range(len(uniq)):
        seg = ys[bounds[i] : bounds[i + 1]]
        block_x.append(uniq[i])
        block_sum.append(float(seg.sum()))
        block_n.append(len(seg))

    # PAV: maintain a stack of blocks with non-decreasing means
    stack = []  # (first_score, sum, count)
    for x0, s, c in zip(block_x, block_sum, block_n):
        stack.append([x0, s, c])
        while len(stack) > 1 and stack[-2][1] / stack[-2][2] > stack[-1][1] / stack[-1][2]:
            x_prev, s_prev, c_prev = stack.pop()
            stack[-1][1] += s_prev
            stack[-1][2] += c_prev
    thresholds = np.array([blk[0] for blk in stack])
    values = np.array([blk[1] / blk[2] for blk in stack])
    return thresholds, values


def calibrate_apply(calibrator: Calibrator, scores):
    return calibrator.apply(scores)
