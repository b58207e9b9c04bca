"""Bagging of reduced-error pruning trees."""

from __future__ import annotations

import numpy as np

from osadetect.classifiers.trees import REPTree


class BaggedREPT:
    def __init__(self, members=None):
        self.members = members or []

    def fit(self, X, y, hyper, rng):
        n = len(y)
        seeds = rng.integers(0, 2 ** 63 - 1, size=hyper["rounds"])
        self.members = []
        for s in seeds:
            member_rng = np.random.default_rng(int(s))
            rows = member_rng.integers(0, n, size=n)  # bootstrap: n draws with replacement
            if len(np.unique(y[rows])) < 2:
                # degenerate bag: resample once more deterministically
                rows = member_rng.integers(0, n, size=n)
            if len(np.unique(y[rows])) < 2:
                continue
            member = REPTree().fit(X[rows], y[rows],
                                   {"min_leaf": hyper["min_leaf"], "max_depth": hyper["max_depth"]},
                                   member_rng)
            self.members.append(member)
        if not self.members:
            raise ValueError("every bootstrap bag was single-class; cannot bag")
        return self

    def predict_proba_batch(self, X):
        votes = np.zeros(len(np.asarray(X)))
        for member in self.members:
            votes += (member.predict_proba_batch(X) >= 0.5).astype(np.float64)
        return votes / len(self.members)

    def to_dict(self):
        return {"members": [m.to_dict() for m in self.members]}

    @classmethod
    def from_dict(cls, d):
        return cls([REPTree.from_dict(m) for m in d["members"]])
