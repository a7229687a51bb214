"""Classifier families (KNN, random forest, gradient boosting, SVM), probability
calibrators, and versioned JSON persistence for fitted models."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidHyperparameter, SchemaFingerprintMismatch
from .boosting import GradientBoostingClassifier
from .calibration import Calibrator, calibrate_apply, calibrate_fit
from .forest import RandomForestClassifier
from .knn import KnnClassifier
from .svm import SvmClassifier
from .tree import DecisionTree

SCHEMA_VERSION = 1

MODEL_KINDS = ("knn", "random_forest", "gradient_boosting", "svm")

# legal hyperparameter names per kind; values validated in _build
_HYPERPARAM_NAMES = {
    "knn": {"k"},
    "random_forest": {"n_estimators", "max_depth", "min_samples_split", "min_samples_leaf"},
    "gradient_boosting": {"n_rounds", "learning_rate", "max_depth"},
    "svm": {"kernel", "c", "gamma"},
}

# default search grids; the random-forest grid is the published one
DEFAULT_GRIDS = {
    "knn": {"k": [3, 5, 7, 9, 11]},
    "random_forest": {
        "n_estimators": [50, 100, 200],
        "max_depth": [None, 10, 20],
        "min_samples_split": [2, 5, 10],
        "min_samples_leaf": [1, 2, 4],
    },
    "gradient_boosting": {
        "n_rounds": [50, 100, 200],
        "learning_rate": [0.05, 0.1],
        "max_depth": [2, 3],
    },
    "svm": {"kernel": ["linear", "rbf"], "c": [0.1, 1.0, 10.0], "gamma": [1.0 / 28.0, 0.1]},
}

DEFAULT_HYPERPARAMETERS = {
    "knn": {"k": 5},
    "random_forest": {"n_estimators": 200, "max_depth": None,
                      "min_samples_split": 5, "min_samples_leaf": 2},
    "gradient_boosting": {"n_rounds": 100, "learning_rate": 0.1, "max_depth": 3},
    "svm": {"kernel": "rbf", "c": 1.0, "gamma": 0.1},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidHyperparameter(f"unknown model kind {self.kind!r}")
        unknown = set(self.hyperparameters) - _HYPERPARAM_NAMES[self.kind]
        if unknown:
            raise InvalidHyperparameter(
                f"unknown hyperparameters for {self.kind}: {sorted(unknown)}"
            )


def schema_fingerprint(feature_names) -> str:
    joined = ",".join(feature_names)
    return hashlib.sha256(joined.encode()).hexdigest()[:16]


@dataclass
class TrainedModel:
    """A fitted classifier plus its training metadata and optional calibrator."""

    kind: str
    model: object
    hyperparameters: dict
    seed: int
    feature_names: tuple[str, ...]
    calibrator: Calibrator | None = None
    converged: bool = True

    @property
    def fingerprint(self) -> str:
        return schema_fingerprint(self.feature_names)

    def check_schema(self, feature_names) -> None:
        if schema_fingerprint(feature_names) != self.fingerprint:
            raise SchemaFingerprintMismatch(
                f"model was trained on a different feature schema "
                f"({self.fingerprint})"
            )

    def _check_width(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.feature_names):
            raise SchemaFingerprintMismatch(
                f"expected {len(self.feature_names)} features, got {X.shape[1]}"
            )
        return X

    def decision(self, X):
        """Raw ranking score: decision function for SVM, probability otherwise."""
        X = self._check_width(X)
        if self.kind == "svm":
            return self.model.decision(X)
        return self.model.predict_proba(X)

    def predict_proba(self, X):
        X = self._check_width(X)
        if self.kind == "svm":
            if self.calibrator is None:
                raise InvalidHyperparameter(
                    "SVM probabilities require a fitted Platt calibrator"
                )
            return self.calibrator.apply(self.model.decision(X))
        p = self.model.predict_proba(X)
        if self.calibrator is not None:
            p = self.calibrator.apply(p)
        return p

    def predict(self, X):
        X = self._check_width(X)
        if self.kind == "svm":
            return self.model.predict(X)
        return (self.model.predict_proba(X) >= 0.5).astype(np.int64)


def _merged_params(spec: ModelSpec) -> dict:
    params = dict(DEFAULT_HYPERPARAMETERS[spec.kind])
    params.update(spec.hyperparameters)
    return params


def _build(spec: ModelSpec, n_features: int):
    p = _merged_params(spec)
    if spec.kind == "knn":
        if not isinstance(p["k"], int) or p["k"] < 1:
            raise InvalidHyperparameter(f"k must be a positive integer, got {p['k']!r}")
        return KnnClassifier(k=p["k"])
    if spec.kind == "random_forest":
        if p["n_estimators"] < 1:
            raise InvalidHyperparameter("n_estimators must be >= 1")
        if p["max_depth"] is not None and p["max_depth"] < 1:
            raise InvalidHyperparameter("max_depth must be None or >= 1")
        if p["min_samples_split"] < 2 or p["min_samples_leaf"] < 1:
            raise InvalidHyperparameter("invalid min_samples_split/min_samples_leaf")
        return RandomForestClassifier(
            n_estimators=p["n_estimators"], max_depth=p["max_depth"],
            min_samples_split=p["min_samples_split"],
            min_samples_leaf=p["min_samples_leaf"], seed=spec.seed,
        )
    if spec.kind == "gradient_boosting":
        if p["n_rounds"] < 0 or p["learning_rate"] <= 0 or p["max_depth"] < 1:
            raise InvalidHyperparameter("invalid gradient boosting hyperparameters")
        return GradientBoostingClassifier(
            n_rounds=p["n_rounds"], learning_rate=p["learning_rate"],
            max_depth=p["max_depth"],
        )
    if spec.kind == "svm":
        if p["kernel"] not in ("linear", "rbf"):
            raise InvalidHyperparameter(f"unknown kernel {p['kernel']!r}")
        return SvmClassifier(kernel=p["kernel"], c=p["c"], gamma=p["gamma"],
                             seed=spec.seed)
    raise InvalidHyperparameter(spec.kind)  # pragma: no cover


def fit_model(spec: ModelSpec, X, y, feature_names=None) -> TrainedModel:
    """Fit one classifier; feature_names default to f0..f{d-1}."""
    X = np.asarray(X, dtype=np.float64)
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(X.shape[1]))
    model = _build(spec, X.shape[1])
    model.fit(X, y)
    converged = getattr(model, "converged", True)
    return TrainedModel(
        kind=spec.kind, model=model, hyperparameters=_merged_params(spec),
        seed=spec.seed, feature_names=tuple(feature_names), converged=converged,
    )


def attach_platt(trained: TrainedModel, scores, labels) -> TrainedModel:
    trained.calibrator = calibrate_fit(scores, labels, "platt")
    return trained


def model_to_dict(trained: TrainedModel) -> dict:
    m = trained.model
    if trained.kind == "knn":
        params = {"k": m.k, "train_x": m.train_x.tolist(), "train_y": m.train_y.tolist()}
    elif trained.kind == "random_forest":
        params = {
            "trees": [t.to_dict() for t in m.trees],
            "importances": m.mdi_importance().tolist(),
        }
    elif trained.kind == "gradient_boosting":
        params = {
            "f0": m.f0, "learning_rate": m.learning_rate,
            "trees": [t.to_dict() for t in m.trees],
            "loss_trace": m.loss_trace,
        }
    else:
        params = {
            "kernel": m.kernel, "c": m.c, "gamma": m.gamma,
            "alpha": m.alpha.tolist(), "y_signed": m.y_signed.tolist(),
            "b": m.b, "train_x": m.train_x.tolist(),
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": trained.kind,
        "hyperparameters": trained.hyperparameters,
        "seed": trained.seed,
        "feature_schema_fingerprint": trained.fingerprint,
        "feature_names": list(trained.feature_names),
        "converged": trained.converged,
        "calibrator": trained.calibrator.to_dict() if trained.calibrator else None,
        "parameters": params,
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema version {doc.get('schema_version')}")
    kind = doc["kind"]
    params = doc["parameters"]
    hp = doc["hyperparameters"]
    if kind == "knn":
        model = KnnClassifier(k=params["k"])
        model.train_x = np.array(params["train_x"], dtype=np.float64)
        model.train_y = np.array(params["train_y"], dtype=np.int64)
    elif kind == "random_forest":
        model = RandomForestClassifier(seed=doc["seed"])
        model.trees = [DecisionTree.from_dict(t) for t in params["trees"]]
        model._importances = np.array(params["importances"])
    elif kind == "gradient_boosting":
        model = GradientBoostingClassifier(
            n_rounds=hp["n_rounds"], learning_rate=params["learning_rate"],
            max_depth=hp["max_depth"],
        )
        model.f0 = params["f0"]
        model.trees = [DecisionTree.from_dict(t, task="mse") for t in params["trees"]]
        model.loss_trace = list(params["loss_trace"])
    elif kind == "svm":
        model = SvmClassifier(kernel=params["kernel"], c=params["c"],
                              gamma=params["gamma"], seed=doc["seed"])
        model.alpha = np.array(params["alpha"])
        model.y_signed = np.array(params["y_signed"])
        model.b = params["b"]
        model.train_x = np.array(params["train_x"], dtype=np.float64)
        model.converged = doc["converged"]
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    calibrator = Calibrator.from_dict(doc["calibrator"]) if doc["calibrator"] else None
    return TrainedModel(
        kind=kind, model=model, hyperparameters=hp, seed=doc["seed"],
        feature_names=tuple(doc["feature_names"]), calibrator=calibrator,
        converged=doc["converged"],
    )


def save_model(trained: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(trained), sort_keys=True))


def load_model(path) -> TrainedModel:
    return model_from_dict(json.loads(Path(path).read_text()))


__all__ = [
    "Calibrator", "DecisionTree", "GradientBoostingClassifier", "KnnClassifier",
    "ModelSpec", "RandomForestClassifier", "SvmClassifier", "TrainedModel",
    "DEFAULT_GRIDS", "DEFAULT_HYPERPARAMETERS", "MODEL_KINDS",
    "attach_platt", "calibrate_apply", "calibrate_fit", "fit_model",
    "load_model", "model_from_dict", "model_to_dict", "save_model",
    "schema_fingerprint",
]
