"""AdaBoost with decision stumps.

Labels are internally -1/+1; the strong classifier's signed margin maps
to a probability through the logistic link p = 1/(1 + exp(-2F)).
Weighted stump search is exhaustive over every midpoint threshold of
every feature with both polarities, evaluated via cumulative sums.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

_ALPHA_CAP = 0.5 * np.log((1.0 - 1e-10) / 1e-10)


def _best_stump(X, y_pm, w):
    """Minimum weighted-error stump: (feature, threshold, left_sign, error)."""
    best = None  # (error, feature, threshold, left_sign)
    w_pos_total = float(w[y_pm > 0].sum())
    for j in range(X.shape[1]):
        x = X[:, j]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        cuts = np.flatnonzero(xs[:-1] < xs[1:])
        if len(cuts) == 0:
            continue
        wy = (w * (y_pm > 0))[order]
        cum_pos = np.cumsum(wy)
        cum_all = np.cumsum(w[order])
        # left predicted +1: errors are negatives on the left, positives on the right
        err_lp = (cum_all[cuts] - cum_pos[cuts]) + (w_pos_total - cum_pos[cuts])
        thr = 0.5 * (xs[cuts] + xs[cuts + 1])
        for err_vec, sign in ((err_lp, 1), (1.0 - err_lp, -1)):
            k = int(np.argmin(err_vec))
            cand = (float(err_vec[k]), j, float(thr[k]), sign)
            if best is None or cand < best:
                best = cand
    if best is None:
        return None
    err, j, t, sign = best
    return j, t, sign, err


def _stump_predict(stump, X):
    j, t, sign = stump["feature"], stump["threshold"], stump["left_sign"]
    return np.where(np.asarray(X)[:, j] <= t, sign, -sign).astype(np.float64)


class AdaBoostStumps:
    def __init__(self, stumps=None, train_epsilons=None):
        self.stumps = stumps or []          # each: feature, threshold, left_sign, alpha
        self.train_epsilons = train_epsilons or []

    def fit(self, X, y, hyper, rng):
        y_pm = np.where(np.asarray(y) > 0, 1.0, -1.0)
        n = len(y_pm)
        w = np.full(n, 1.0 / n)
        self.stumps, self.train_epsilons = [], []
        for _ in range(hyper["rounds"]):
            found = _best_stump(X, y_pm, w / w.sum())
            if found is None:
                break
            j, t, sign, eps = found
            eps = min(max(eps, 0.0), 1.0)
            if eps >= 0.5:
                break
            alpha = _ALPHA_CAP if eps <= 0 else 0.5 * np.log((1.0 - eps) / eps)
            stump = {"feature": int(j), "threshold": float(t), "left_sign": int(sign),
                     "alpha": float(alpha)}
            self.stumps.append(stump)
            self.train_epsilons.append(float(eps))
            if eps <= 0:
                break
            h = _stump_predict(stump, X)
            w = w * np.exp(-alpha * y_pm * h)
            w /= w.sum()
        return self

    def margin(self, X):
        X = np.asarray(X, dtype=np.float64)
        f = np.zeros(len(X))
        for s in self.stumps:
            f += s["alpha"] * _stump_predict(s, X)
        return f

    def predict_proba_batch(self, X):
        return expit(2.0 * self.margin(X))

    def to_dict(self):
        return {"stumps": self.stumps, "train_epsilons": self.train_epsilons}

    @classmethod
    def from_dict(cls, d):
        return cls(d["stumps"], d.get("train_epsilons", []))
