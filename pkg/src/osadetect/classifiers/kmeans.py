"""K-means sanity baseline (unsupervised; expected near chance)."""

from __future__ import annotations

import numpy as np

from osadetect.classifiers.base import ZScorer, laplace


def _kmeanspp_init(Xz, k, rng):
    centers = [Xz[rng.integers(len(Xz))]]
    while len(centers) < k:
        d2 = np.min([np.sum((Xz - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total == 0:
            centers.append(Xz[rng.integers(len(Xz))])
            continue
        centers.append(Xz[rng.choice(len(Xz), p=d2 / total)])
    return np.array(centers)


class KMeansBaseline:
    def __init__(self, scaler=None, centers=None, cluster_counts=None):
        self.scaler = scaler
        self.centers = centers
        self.cluster_counts = cluster_counts or []

    def fit(self, X, y, hyper, rng):
        k = hyper["clusters"]
        self.scaler = ZScorer.fit(X)
        Xz = self.scaler.transform(X)
        centers = _kmeanspp_init(Xz, k, rng)
        for _ in range(hyper["max_iter"]):
            d2 = ((Xz[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            assign = np.argmin(d2, axis=1)
            new_centers = centers.copy()
            for c in range(k):
                rows = assign == c
                if rows.any():
                    new_centers[c] = Xz[rows].mean(axis=0)
            if np.allclose(new_centers, centers):
                break
            centers = new_centers
        self.centers = centers
        d2 = ((Xz[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        self.cluster_counts = [
            (int(np.sum(y[assign == c] == 1)), int(np.sum(y[assign == c] == 0)))
            for c in range(k)
        ]
        return self

    def predict_proba_batch(self, X):
        Xz = self.scaler.transform(X)
        d2 = ((Xz[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        probs = np.array([laplace(*c) for c in self.cluster_counts])
        return probs[assign]

    def to_dict(self):
        return {"scaler": self.scaler.to_dict(), "centers": self.centers.tolist(),
                "cluster_counts": [list(c) for c in self.cluster_counts]}

    @classmethod
    def from_dict(cls, d):
        return cls(ZScorer.from_dict(d["scaler"]), np.array(d["centers"], dtype=np.float64),
                   [tuple(c) for c in d["cluster_counts"]])
