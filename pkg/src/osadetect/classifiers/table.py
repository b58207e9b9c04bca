"""Decision table with best-first feature-subset search.

Numeric features are discretized into equal-frequency bins; table cells
are the distinct bin tuples over the chosen subset.  Subsets are scored
by leave-one-out accuracy of cell-majority prediction; the search stops
after a fixed number of non-improving expansions.  Unmatched query rows
fall back to the nearest cell in bin-code space.
"""

from __future__ import annotations

import numpy as np

from osadetect.classifiers.base import laplace


def _bin_edges(x, bins):
    qs = np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1])
    return np.unique(qs)


def _encode(X, edges_list):
    codes = np.empty((len(X), len(edges_list)), dtype=np.int64)
    for j, edges in enumerate(edges_list):
        codes[:, j] = np.searchsorted(edges, X[:, j], side="right")
    return codes


def _loo_accuracy(codes, y, subset):
    """Leave-one-out accuracy of cell-majority prediction on a feature subset."""
    n = len(y)
    if not subset:
        pos = int(y.sum())
        correct = 0
        for yi in y:
            p, q = pos - (yi == 1), (n - pos) - (yi == 0)
            correct += (1 if p >= q else 0) == yi
        return correct / n
    keys = [tuple(row) for row in codes[:, subset]]
    cells = {}
    for key, yi in zip(keys, y):
        p, q = cells.get(key, (0, 0))
        cells[key] = (p + (yi == 1), q + (yi == 0))
    pos_total = int(y.sum())
    correct = 0
    for key, yi in zip(keys, y):
        p, q = cells[key]
        p -= yi == 1
        q -= yi == 0
        if p + q == 0:  # singleton cell: back off to the global majority
            p = pos_total - (yi == 1)
            q = (n - pos_total) - (yi == 0)
        correct += (1 if p >= q else 0) == yi
    return correct / n


class DecisionTable:
    def __init__(self, subset=None, edges=None, cells=None, global_counts=None, bins=10):
        self.subset = subset or []
        self.edges = edges or []
        self.cells = cells or {}
        self.global_counts = global_counts or (0, 0)
        self.bins = bins

    def fit(self, X, y, hyper, rng):
        self.bins = hyper["bins"]
        stall_limit = hyper["search_stall"]
        n_features = X.shape[1]
        all_edges = [_bin_edges(X[:, j], self.bins) for j in range(n_features)]
        codes = _encode(X, all_edges)

        best_subset, best_acc = (), _loo_accuracy(codes, y, [])
        open_list = [(-best_acc, best_subset)]
        visited = {best_subset}
        stall = 0
        while open_list and stall < stall_limit:
            open_list.sort()
            _, parent = open_list.pop(0)
            improved = False
            for j in range(n_features):
                if j in parent:
                    continue
                child = tuple(sorted(parent + (j,)))
                if child in visited:
                    continue
                visited.add(child)
                acc = _loo_accuracy(codes, y, list(child))
                open_list.append((-acc, child))
                if acc > best_acc + 1e-12:
                    best_subset, best_acc = child, acc
                    improved = True
            stall = 0 if improved else stall + 1
            open_list.sort()
            del open_list[8:]  # beam cap keeps the search bounded

        self.subset = list(best_subset)
        self.edges = [all_edges[j].tolist() for j in self.subset]
        sub_codes = codes[:, self.subset] if self.subset else np.zeros((len(y), 0), dtype=np.int64)
        self.cells = {}
        for row, yi in zip(sub_codes, y):
            key = tuple(int(v) for v in row)
            p, q = self.cells.get(key, (0, 0))
            self.cells[key] = (p + int(yi == 1), q + int(yi == 0))
        self.global_counts = (int(y.sum()), int(len(y) - y.sum()))
        return self

    def predict_proba_batch(self, X):
        X = np.asarray(X, dtype=np.float64)
        if not self.subset:
            return np.full(len(X), laplace(*self.global_counts))
        edges = [np.asarray(e) for e in self.edges]
        codes = np.empty((len(X), len(self.subset)), dtype=np.int64)
        for j, (feat, e) in enumerate(zip(self.subset, edges)):
            codes[:, j] = np.searchsorted(e, X[:, feat], side="right")
        cell_keys = sorted(self.cells)
        key_matrix = np.array(cell_keys, dtype=np.int64)
        out = np.empty(len(X))
        for i, row in enumerate(codes):
            key = tuple(int(v) for v in row)
            if key in self.cells:
                out[i] = laplace(*self.cells[key])
            else:
                d2 = np.sum((key_matrix - row) ** 2, axis=1)
                out[i] = laplace(*self.cells[cell_keys[int(np.argmin(d2))]])
        return out

    def to_dict(self):
        return {
            "subset": self.subset,
            "edges": self.edges,
            "cells": [[list(k), list(v)] for k, v in sorted(self.cells.items())],
            "global_counts": list(self.global_counts),
            "bins": self.bins,
        }

    @classmethod
    def from_dict(cls, d):
        cells = {tuple(k): tuple(v) for k, v in d["cells"]}
        return cls(d["subset"], d["edges"], cells, tuple(d["global_counts"]), d["bins"])
