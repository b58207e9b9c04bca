"""Shared classifier machinery: predictions, validation, z-scoring, entropy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Prediction:
    p_apnea: float

    def __post_init__(self):
        if not 0.0 <= self.p_apnea <= 1.0:
            raise ValueError(f"probability {self.p_apnea} outside [0, 1]")

    @property
    def decision(self):
        return "apnoeic" if self.p_apnea >= 0.5 else "normal"


def validate_training_data(X, y, feature_names):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise ValueError("training data contains a single class")
    bad = ~np.isfinite(X)
    if bad.any():
        j = int(np.argmax(bad.any(axis=0)))
        raise ValueError(f"non-finite values in feature {feature_names[j]!r}")
    return X, y


def laplace(n_pos, n_neg):
    """Laplace-smoothed positive-class probability."""
    return (n_pos + 1.0) / (n_pos + n_neg + 2.0)


def binary_entropy(n_pos, n_neg):
    n = n_pos + n_neg
    if n == 0:
        return 0.0
    h = 0.0
    for c in (n_pos, n_neg):
        if c > 0:
            p = c / n
            h -= p * np.log2(p)
    return h


class ZScorer:
    """Per-feature standardization; zero-variance features map to zero."""

    def __init__(self, mean, std):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0, ddof=0)
        std[std == 0] = 1.0
        return cls(mean, std)

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.std

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["std"])
