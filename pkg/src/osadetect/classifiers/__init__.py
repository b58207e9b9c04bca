"""Supervised classifiers, each emitting a calibrated apnea probability.

Every algorithm trains deterministically from (data, hyperparameters,
seed) and serializes to a self-describing JSON document that reloads to
bit-identical predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from osadetect.classifiers.bagging import BaggedREPT
from osadetect.classifiers.base import Prediction, validate_training_data
from osadetect.classifiers.boosting import AdaBoostStumps
from osadetect.classifiers.kmeans import KMeansBaseline
from osadetect.classifiers.knn import KNN
from osadetect.classifiers.table import DecisionTable
from osadetect.classifiers.trees import C45Tree, REPTree
from osadetect.mi import FeatureMatrix

MODEL_FORMAT = "osadetect-model"
MODEL_VERSION = 1

_REGISTRY = {
    "knn": KNN,
    "decision_table": DecisionTable,
    "c45_tree": C45Tree,
    "rep_tree": REPTree,
    "adaboost_stump": AdaBoostStumps,
    "bagging_rept": BaggedREPT,
    "kmeans_baseline": KMeansBaseline,
}

ALGORITHMS = tuple(_REGISTRY)

_DEFAULT_HYPER = {
    "knn": {"k": 5},
    "decision_table": {"bins": 10, "search_stall": 5},
    "c45_tree": {"min_leaf": 2, "max_depth": None, "cf": 0.25},
    "rep_tree": {"min_leaf": 2, "max_depth": None},
    "adaboost_stump": {"rounds": 50},
    "bagging_rept": {"rounds": 10, "min_leaf": 2, "max_depth": None},
    "kmeans_baseline": {"clusters": 2, "max_iter": 100},
}


def default_hyper(algorithm) -> dict:
    if algorithm not in _DEFAULT_HYPER:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    return dict(_DEFAULT_HYPER[algorithm])


def _check_hyper(algorithm, hyper):
    merged = default_hyper(algorithm)
    for key, value in (hyper or {}).items():
        if key not in merged:
            raise ValueError(f"unknown hyperparameter {key!r} for {algorithm}")
        merged[key] = value
    if algorithm == "knn" and (merged["k"] < 1 or merged["k"] % 2 == 0):
        raise ValueError(f"knn k must be odd and positive, got {merged['k']}")
    for key in ("rounds", "min_leaf", "bins", "clusters", "max_iter", "search_stall"):
        if key in merged and merged[key] is not None and merged[key] < 1:
            raise ValueError(f"{key} must be >= 1, got {merged[key]}")
    return merged


@dataclass
class ClassifierModel:
    algorithm: str
    feature_names: list[str]
    hyper: dict
    seed: int
    impl: object = field(repr=False)

    def to_dict(self):
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "algorithm": self.algorithm,
            "feature_names": self.feature_names,
            "hyper": self.hyper,
            "seed": self.seed,
            "params": self.impl.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not an osadetect model document")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        impl = _REGISTRY[d["algorithm"]].from_dict(d["params"])
        return cls(d["algorithm"], list(d["feature_names"]), d["hyper"], d["seed"], impl)


def train(algorithm, m: FeatureMatrix, hyper=None, seed=0) -> ClassifierModel:
    """Fit one classifier; deterministic given (matrix, hyperparameters, seed)."""
    merged = _check_hyper(algorithm, hyper)
    X, y = validate_training_data(m.X, m.y, m.feature_names)
    rng = np.random.default_rng(seed)
    impl = _REGISTRY[algorithm]().fit(X, y, merged, rng)
    return ClassifierModel(algorithm, list(m.feature_names), merged, seed, impl)


def _vectorize(model, x):
    if isinstance(x, Mapping):
        missing = [n for n in model.feature_names if n not in x]
        if missing:
            raise ValueError(f"feature vector missing {missing[:3]}")
        return np.array([float(x[n]) for n in model.feature_names])
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (len(model.feature_names),):
        raise ValueError(
            f"expected {len(model.feature_names)} features, got shape {x.shape}"
        )
    return x


def predict_proba(model: ClassifierModel, x) -> Prediction:
    """Calibrated apnea probability for one feature vector (mapping or array)."""
    vec = _vectorize(model, x)
    p = float(model.impl.predict_proba_batch(vec[None, :])[0])
    return Prediction(min(max(p, 0.0), 1.0))


def predict_proba_batch(model: ClassifierModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.clip(model.impl.predict_proba_batch(X), 0.0, 1.0)


def model_quality(model: ClassifierModel, holdout: FeatureMatrix):
    """(sensitivity, specificity) on a holdout at threshold 0.5; None if undefined."""
    p = predict_proba_batch(model, holdout.X)
    pred = p >= 0.5
    y = holdout.y.astype(bool)
    tp = int(np.sum(pred & y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    fp = int(np.sum(pred & ~y))
    sens = tp / (tp + fn) if tp + fn else None
    spec = tn / (tn + fp) if tn + fp else None
    return sens, spec


def save_model(model: ClassifierModel, path, extra=None):
    doc = model.to_dict()
    if extra:
        doc["meta"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ClassifierModel:
    with open(path) as fh:
        return ClassifierModel.from_dict(json.load(fh))
