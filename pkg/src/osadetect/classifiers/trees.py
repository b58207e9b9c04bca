"""Decision trees: C4.5-style gain-ratio tree with pessimistic pruning and
a reduced-error pruning tree (REPT).

Nodes are plain dicts so models serialize to JSON unchanged.  Split
convention: x[feature] <= threshold routes left.  Ties in split search
break toward the lower feature index, then the smaller threshold, so
training is fully deterministic.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from osadetect.classifiers.base import binary_entropy, laplace


def _leaf(n_pos, n_neg):
    return {"leaf": True, "n_pos": int(n_pos), "n_neg": int(n_neg)}


def _node_counts(node):
    return node["n_pos"], node["n_neg"]


def _best_split(X, y, min_leaf, use_gain_ratio):
    """Best (feature, threshold, score) over all midpoint splits, or None."""
    n = len(y)
    n_pos_total = int(y.sum())
    parent_h = binary_entropy(n_pos_total, n - n_pos_total)
    best = None  # (negscore, feature, threshold)
    for j in range(X.shape[1]):
        x = X[:, j]
        order = np.argsort(x, kind="mergesort")
        xs = x[order]
        ys = y[order]
        cut_ok = xs[:-1] < xs[1:]  # split between distinct values only
        idx = np.flatnonzero(cut_ok)
        idx = idx[(idx + 1 >= min_leaf) & (n - idx - 1 >= min_leaf)]
        if len(idx) == 0:
            continue
        cum_pos = np.cumsum(ys)
        nl = idx + 1
        pl = cum_pos[idx]
        nr = n - nl
        pr = n_pos_total - pl
        hl = _entropy_vec(pl, nl - pl)
        hr = _entropy_vec(pr, nr - pr)
        gain = parent_h - (nl * hl + nr * hr) / n
        if use_gain_ratio:
            split_info = _entropy_vec(nl, nr)
            score = np.where((gain > 1e-12) & (split_info > 0), gain / split_info, -1.0)
        else:
            score = np.where(gain > 1e-12, gain, -1.0)
        k = int(np.argmax(score))
        if score[k] <= 0:
            continue
        thr = 0.5 * (xs[idx[k]] + xs[idx[k] + 1])
        cand = (-score[k], j, thr)
        if best is None or cand < best:
            best = cand
    if best is None:
        return None
    return best[1], best[2], -best[0]


def _entropy_vec(pos, neg):
    n = pos + neg
    h = np.zeros(np.shape(n), dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        for c in (pos, neg):
            frac = np.where(n > 0, c / np.maximum(n, 1), 0.0)
            h -= np.where(frac > 0, frac * np.log2(np.maximum(frac, 1e-300)), 0.0)
    return h


def grow_tree(X, y, min_leaf=2, max_depth=None, use_gain_ratio=True, depth=0):
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0 or len(y) < 2 * min_leaf or (
        max_depth is not None and depth >= max_depth
    ):
        return _leaf(n_pos, n_neg)
    split = _best_split(X, y, min_leaf, use_gain_ratio)
    if split is None:
        return _leaf(n_pos, n_neg)
    j, thr, _ = split
    left = X[:, j] <= thr
    return {
        "leaf": False,
        "feature": int(j),
        "threshold": float(thr),
        "n_pos": n_pos,
        "n_neg": n_neg,
        "left": grow_tree(X[left], y[left], min_leaf, max_depth, use_gain_ratio, depth + 1),
        "right": grow_tree(X[~left], y[~left], min_leaf, max_depth, use_gain_ratio, depth + 1),
    }


def tree_predict_proba(node, x):
    while not node["leaf"]:
        node = node["left"] if x[node["feature"]] <= node["threshold"] else node["right"]
    return laplace(node["n_pos"], node["n_neg"])


def tree_predict_proba_batch(node, X):
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(len(X))
    idx = np.arange(len(X))
    stack = [(node, idx)]
    while stack:
        nd, rows = stack.pop()
        if len(rows) == 0:
            continue
        if nd["leaf"]:
            out[rows] = laplace(nd["n_pos"], nd["n_neg"])
            continue
        mask = X[rows, nd["feature"]] <= nd["threshold"]
        stack.append((nd["left"], rows[mask]))
        stack.append((nd["right"], rows[~mask]))
    return out


def tree_depth(node):
    if node["leaf"]:
        return 0
    return 1 + max(tree_depth(node["left"]), tree_depth(node["right"]))


# ---------------------------------------------------------------------------
# C4.5: pessimistic (confidence-bound) pruning
# ---------------------------------------------------------------------------

def _upper_error(errors, n, z):
    """Upper confidence bound on the error rate (C4.5 pessimistic estimate)."""
    if n == 0:
        return 0.0
    f = errors / n
    z2 = z * z
    num = f + z2 / (2 * n) + z * np.sqrt(f * (1 - f) / n + z2 / (4 * n * n))
    return num / (1 + z2 / n)


def _pessimistic_errors(node, z):
    n_pos, n_neg = _node_counts(node)
    n = n_pos + n_neg
    if node["leaf"]:
        return n * _upper_error(min(n_pos, n_neg), n, z)
    return _pessimistic_errors(node["left"], z) + _pessimistic_errors(node["right"], z)


def prune_pessimistic(node, cf=0.25):
    if node["leaf"]:
        return node
    z = float(ndtri(1.0 - cf))
    node = dict(node)
    node["left"] = prune_pessimistic(node["left"], cf)
    node["right"] = prune_pessimistic(node["right"], cf)
    n_pos, n_neg = _node_counts(node)
    as_leaf = (n_pos + n_neg) * _upper_error(min(n_pos, n_neg), n_pos + n_neg, z)
    if as_leaf <= _pessimistic_errors(node, z) + 1e-12:
        return _leaf(n_pos, n_neg)
    return node


class C45Tree:
    def __init__(self, tree=None):
        self.tree = tree

    def fit(self, X, y, hyper, rng):
        grown = grow_tree(X, y, min_leaf=hyper["min_leaf"], max_depth=hyper["max_depth"],
                          use_gain_ratio=True)
        self.tree = prune_pessimistic(grown, cf=hyper["cf"])
        return self

    def predict_proba_batch(self, X):
        return tree_predict_proba_batch(self.tree, X)

    def to_dict(self):
        return {"tree": self.tree}

    @classmethod
    def from_dict(cls, d):
        return cls(d["tree"])


# ---------------------------------------------------------------------------
# REPT: grow on two thirds, reduced-error prune on the held-out third
# ---------------------------------------------------------------------------

def _route(node, X, rows, sink):
    """Distribute prune-set rows over the tree, collecting them per node."""
    sink[id(node)] = rows
    if node["leaf"]:
        return
    if len(rows):
        mask = X[rows, node["feature"]] <= node["threshold"]
        _route(node["left"], X, rows[mask], sink)
        _route(node["right"], X, rows[~mask], sink)
    else:
        _route(node["left"], X, rows, sink)
        _route(node["right"], X, rows, sink)


def _rep_prune(node, X, y, sink):
    if node["leaf"]:
        rows = sink[id(node)]
        majority = 1 if node["n_pos"] >= node["n_neg"] else 0
        return node, int(np.sum(y[rows] != majority)) if len(rows) else 0
    pruned_left, err_left = _rep_prune(node["left"], X, y, sink)
    pruned_right, err_right = _rep_prune(node["right"], X, y, sink)
    rows = sink[id(node)]
    n_pos, n_neg = _node_counts(node)
    majority = 1 if n_pos >= n_neg else 0
    leaf_err = int(np.sum(y[rows] != majority)) if len(rows) else 0
    if leaf_err <= err_left + err_right:
        return _leaf(n_pos, n_neg), leaf_err
    node = dict(node)
    node["left"], node["right"] = pruned_left, pruned_right
    return node, err_left + err_right


def stratified_split(y, frac, rng):
    """Index split keeping class proportions; returns (part_a, part_b)."""
    a_idx, b_idx = [], []
    for cls in np.unique(y):
        rows = np.flatnonzero(y == cls)
        rows = rows[rng.permutation(len(rows))]
        cut = int(round(frac * len(rows)))
        a_idx.extend(rows[:cut])
        b_idx.extend(rows[cut:])
    return np.sort(np.array(a_idx, dtype=int)), np.sort(np.array(b_idx, dtype=int))


class REPTree:
    def __init__(self, tree=None):
        self.tree = tree

    def fit(self, X, y, hyper, rng):
        grow_rows, prune_rows = stratified_split(y, 2.0 / 3.0, rng)
        if len(np.unique(y[grow_rows])) < 2 or len(prune_rows) == 0:
            grow_rows = np.arange(len(y))
            prune_rows = np.arange(0)
        tree = grow_tree(X[grow_rows], y[grow_rows], min_leaf=hyper["min_leaf"],
                         max_depth=hyper["max_depth"], use_gain_ratio=False)
        if len(prune_rows):
            sink = {}
            _route(tree, X, prune_rows, sink)
            tree, _ = _rep_prune(tree, X, y, sink)
        self.tree = tree
        return self

    def predict_proba_batch(self, X):
        return tree_predict_proba_batch(self.tree, X)

    def to_dict(self):
        return {"tree": self.tree}

    @classmethod
    def from_dict(cls, d):
        return cls(d["tree"])
