"""K nearest neighbors on z-scored features."""

from __future__ import annotations

import numpy as np

from osadetect.classifiers.base import ZScorer


class KNN:
    def __init__(self, k=5, scaler=None, Xz=None, y=None):
        self.k = k
        self.scaler = scaler
        self.Xz = Xz
        self.y = y

    def fit(self, X, y, hyper, rng):
        self.k = hyper["k"]
        self.scaler = ZScorer.fit(X)
        self.Xz = self.scaler.transform(X)
        self.y = np.asarray(y, dtype=np.int64)
        return self

    def predict_proba_batch(self, X):
        q = self.scaler.transform(X)
        out = np.empty(len(q))
        k = min(self.k, len(self.y))
        for i, row in enumerate(q):
            d2 = np.sum((self.Xz - row) ** 2, axis=1)
            near = np.argsort(d2, kind="mergesort")[:k]  # stable: distance ties keep row order
            out[i] = self.y[near].mean()
        return out

    def to_dict(self):
        return {"k": self.k, "scaler": self.scaler.to_dict(),
                "Xz": self.Xz.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["k"], ZScorer.from_dict(d["scaler"]),
                   np.array(d["Xz"], dtype=np.float64), np.array(d["y"], dtype=np.int64))
