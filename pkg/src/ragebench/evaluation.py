"""Classification metrics, ROC/calibration/learning curves, grid-search tuning
with stratified cross-validation, Welch t-tests and feature correlations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .data import FeatureTable, kfold
from .errors import DegenerateClass, LengthMismatch, SingleClass, SizeTooLarge
from .models import ModelSpec, fit_model

LOG_LOSS_CLIP = 1e-15


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass
class EvaluationReport:
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    kappa: float
    mcc: float
    log_loss: float
    roc_points: list = field(default_factory=list)
    calibration_points: list = field(default_factory=list)
    model_id: str = ""
    degenerate: list = field(default_factory=list)

    def to_dict(self):
        return {
            "model_id": self.model_id,
            "confusion": self.confusion.to_dict(),
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "kappa": self.kappa,
            "mcc": self.mcc,
            "log_loss": self.log_loss,
            "degenerate": self.degenerate,
        }


def confusion_counts(labels, predictions) -> ConfusionMatrix:
    labels = np.asarray(labels)
    predictions = np.asarray(predictions)
    return ConfusionMatrix(
        tp=int(np.sum((predictions == 1) & (labels == 1))),
        fp=int(np.sum((predictions == 1) & (labels == 0))),
        fn=int(np.sum((predictions == 0) & (labels == 1))),
        tn=int(np.sum((predictions == 0) & (labels == 0))),
    )


def scalar_metrics(cm: ConfusionMatrix) -> dict:
    """Accuracy, precision, recall, F1, kappa and MCC from counts alone.

    Ratios with zero denominators are reported as 0 and flagged.
    """
    n = cm.n
    degenerate = []
    accuracy = (cm.tp + cm.tn) / n

    precision = recall = f1 = 0.0
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        degenerate.append("precision_zero_denominator")
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        degenerate.append("recall_zero_denominator")
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        degenerate.append("f1_zero_denominator")

    kappa = 0.0
    expected = ((cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn)) / n**2
    if expected < 1.0:
        kappa = (accuracy - expected) / (1.0 - expected)
    else:
        degenerate.append("kappa_undefined")

    mcc = 0.0
    mcc_denom = np.sqrt(
        float(cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    )
    if mcc_denom > 0:
        mcc = (cm.tp * cm.tn - cm.fp * cm.fn) / mcc_denom
    else:
        degenerate.append("mcc_zero_denominator")

    return {
        "accuracy": accuracy, "precision": precision, "recall": recall,
        "f1": f1, "kappa": kappa, "mcc": mcc, "degenerate": degenerate,
    }


def log_loss(labels, probs) -> float:
    labels = np.asarray(labels, dtype=np.float64)
    p = np.clip(np.asarray(probs, dtype=np.float64), LOG_LOSS_CLIP, 1.0 - LOG_LOSS_CLIP)
    return float(-np.mean(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p)))


def _average_ranks(x: np.ndarray) -> np.ndarray:
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    avg = ends - (counts - 1) / 2.0  # mean rank inside each tie group (1-based)
    return avg[inverse]


def roc_auc(labels, scores) -> tuple[list[tuple[float, float]], float]:
    """ROC points at every distinct threshold plus tie-corrected Mann-Whitney AUC."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if len(labels) != len(scores):
        raise LengthMismatch("labels and scores must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("ROC needs both classes present")

    ranks = _average_ranks(scores)
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    order = np.argsort(-scores, kind="stable")
    sorted_labels = labels[order]
    sorted_scores = scores[order]
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    boundaries = np.concatenate([distinct, [len(scores) - 1]])
    tp = np.cumsum(sorted_labels == 1)[boundaries]
    fp = np.cumsum(sorted_labels == 0)[boundaries]
    points = [(0.0, 0.0)] + [
        (float(f) / n_neg, float(t) / n_pos) for f, t in zip(fp, tp)
    ]
    return points, float(auc)


def classification_metrics(labels, probs, threshold=0.5, model_id="") -> EvaluationReport:
    labels = np.asarray(labels)
    probs = np.asarray(probs, dtype=np.float64)
    if len(labels) != len(probs):
        raise LengthMismatch("labels and probs must have equal length")
    if len(labels) == 0:
        raise LengthMismatch("need at least one sample")
    cm = confusion_counts(labels, (probs >= threshold).astype(int))
    scalars = scalar_metrics(cm)
    degenerate = scalars.pop("degenerate")
    try:
        roc_points, auc = roc_auc(labels, probs)
    except SingleClass:
        roc_points, auc = [], 0.0
        degenerate.append("auc_single_class")
    return EvaluationReport(
        confusion=cm,
        auc=auc,
        log_loss=log_loss(labels, probs),
        roc_points=roc_points,
        calibration_points=calibration_curve(labels, probs),
        model_id=model_id,
        degenerate=degenerate,
        **scalars,
    )


def calibration_curve(labels, probs, n_bins=10) -> list[tuple[float, float, int]]:
    """(mean predicted, observed frequency, count) per non-empty equal-width bin."""
    labels = np.asarray(labels, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    bins = np.minimum((probs * n_bins).astype(int), n_bins - 1)
    points = []
    for b in range(n_bins):
        members = bins == b
        count = int(np.sum(members))
        if count == 0:
            continue
        points.append((float(probs[members].mean()), float(labels[members].mean()), count))
    return points


@dataclass
class GridSearchResult:
    entries: list  # {"hyperparameters", "mean_accuracy", "std_accuracy", "fold_scores"}
    best_hyperparameters: dict
    best_mean_accuracy: float
    fit_count: int

    def to_dict(self):
        return {
            "entries": self.entries,
            "best_hyperparameters": _jsonable(self.best_hyperparameters),
            "best_mean_accuracy": self.best_mean_accuracy,
            "fit_count": self.fit_count,
        }


def _jsonable(params: dict) -> dict:
    return {k: (v if v is None or isinstance(v, (int, float, str, bool)) else str(v))
            for k, v in params.items()}


def expand_grid(grid: dict) -> list[dict]:
    """Cartesian product in lexicographic (key order, value order) sequence."""
    if not grid:
        raise ValueError("grid must be nonempty")
    keys = list(grid.keys())
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def grid_search_cv(kind: str, grid: dict, table: FeatureTable, k: int = 5,
                   seed: int = 0) -> GridSearchResult:
    """Exhaustive search scored by mean CV accuracy; ties keep the earlier combo."""
    combos = expand_grid(grid)
    folds = kfold(table, k, seed)
    entries = []
    best_idx = -1
    best_mean = -np.inf
    fit_count = 0
    for ci, params in enumerate(combos):
        scores = []
        for fold in folds:
            train, test = table.subset(fold.train), table.subset(fold.test)
            try:
                model = fit_model(ModelSpec(kind, params, seed), train.rows, train.labels)
            except Exception as exc:
                raise type(exc)(f"fit failed for combination {params}: {exc}") from exc
            fit_count += 1
            scores.append(float(np.mean(model.predict(test.rows) == test.labels)))
        mean = float(np.mean(scores))
        entries.append({
            "hyperparameters": _jsonable(params),
            "mean_accuracy": mean,
            "std_accuracy": float(np.std(scores)),
            "fold_scores": scores,
        })
        if mean > best_mean:
            best_mean = mean
            best_idx = ci
    return GridSearchResult(
        entries=entries,
        best_hyperparameters=combos[best_idx],
        best_mean_accuracy=best_mean,
        fit_count=fit_count,
    )


def learning_curve(spec: ModelSpec, table: FeatureTable, sizes, k: int = 5,
                   seed: int = 0) -> list[dict]:
    """Train/validation accuracy per training-set size across CV folds."""
    folds = kfold(table, k, seed)
    min_train = min(len(f.train) for f in folds)
    sizes = list(sizes)
    for size in sizes:
        if size > min_train:
            raise SizeTooLarge(f"size {size} exceeds smallest fold train size {min_train}")
    rng = np.random.Generator(np.random.PCG64(seed))
    results = []
    for size in sizes:
        train_scores, val_scores = [], []
        for fold in folds:
            subset_idx = _stratified_subsample(table.labels, fold.train, size, rng)
            train = table.subset(subset_idx)
            test = table.subset(fold.test)
            model = fit_model(spec, train.rows, train.labels)
            train_scores.append(float(np.mean(model.predict(train.rows) == train.labels)))
            val_scores.append(float(np.mean(model.predict(test.rows) == test.labels)))
        results.append({
            "size": int(size),
            "train_mean": float(np.mean(train_scores)),
            "train_std": float(np.std(train_scores)),
            "val_mean": float(np.mean(val_scores)),
            "val_std": float(np.std(val_scores)),
            "train_scores": train_scores,
            "val_scores": val_scores,
        })
    return results


def _stratified_subsample(labels, pool, size, rng) -> np.ndarray:
    pool = np.asarray(pool)
    chosen = []
    remainder = size
    classes = sorted(np.unique(labels[pool]))
    for i, c in enumerate(classes):
        members = pool[labels[pool] == c]
        want = round(size * len(members) / len(pool)) if i < len(classes) - 1 else remainder
        want = min(want, len(members), remainder)
        picked = members[rng.permutation(len(members))[:want]]
        chosen.append(picked)
        remainder -= len(picked)
    return np.sort(np.concatenate(chosen))


def welch_t_test(a, b) -> tuple[float, float, float]:
    """Two-sided Welch t-test: returns (t, dof, p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise DegenerateClass("each group needs >= 2 values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    sa, sb = va / len(a), vb / len(b)
    se = np.sqrt(sa + sb)
    diff = a.mean() - b.mean()
    if se == 0.0:
        # both groups constant: identical means give no evidence at all
        return (0.0, float(len(a) + len(b) - 2), 1.0) if diff == 0.0 \
            else (float(np.sign(diff)) * np.inf, float(len(a) + len(b) - 2), 0.0)
    t = diff / se
    dof = (sa + sb) ** 2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    # two-sided p via the regularized incomplete beta form of the t CDF
    x = dof / (dof + t * t)
    p = float(betainc(dof / 2.0, 0.5, x))
    return float(t), float(dof), p


def feature_t_tests(table: FeatureTable) -> list[dict]:
    """Welch test per feature, class 1 (rage) minus class 0 (non-rage)."""
    pos = table.rows[table.labels == 1]
    neg = table.rows[table.labels == 0]
    if len(pos) < 2 or len(neg) < 2:
        raise DegenerateClass("both classes need >= 2 rows")
    out = []
    for j in range(table.rows.shape[1]):
        t, dof, p = welch_t_test(pos[:, j], neg[:, j])
        out.append({"feature": j, "t": t, "dof": dof, "p": p})
    return out


def correlation_matrix(rows) -> tuple[np.ndarray, list[int]]:
    """Pearson correlations; constant columns yield 0 off-diagonal and are flagged."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    std = rows.std(axis=0)
    constant = [int(i) for i in np.nonzero(std == 0)[0]]
    safe_std = np.where(std == 0, 1.0, std)
    centered = (rows - rows.mean(axis=0)) / safe_std
    corr = (centered.T @ centered) / rows.shape[0]
    corr = 0.5 * (corr + corr.T)
    if constant:
        corr[constant, :] = 0.0
        corr[:, constant] = 0.0
    np.fill_diagonal(corr, 1.0)
    return corr, constant
