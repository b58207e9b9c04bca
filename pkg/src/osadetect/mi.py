"""Mutual-information estimation and MI-based forward feature selection.

The estimator is a plug-in over an equal-frequency (rank) partition,
which buys invariance to monotone transforms; inputs with few distinct
values (class labels, counts) fall back to one cell per value.  Forward
selection is the greedy relevance-minus-redundancy criterion with the
redundancy term normalized by min-entropy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


def _auto_bins(n):
    return max(2, math.ceil(math.sqrt(n / 5)))


def _assign_bins(x, bins):
    """Cell index per sample; returns (codes, n_cells)."""
    x = np.asarray(x, dtype=np.float64)
    uniq = np.unique(x)
    if len(uniq) <= bins:
        return np.searchsorted(uniq, x), len(uniq)
    order = np.argsort(x, kind="mergesort")  # stable: ties keep input order
    ranks = np.empty(len(x), dtype=np.int64)
    ranks[order] = np.arange(len(x))
    return (ranks * bins) // len(x), bins


def _mi_from_codes(bx, nbx, by, nby):
    counts = np.bincount(bx * nby + by, minlength=nbx * nby).reshape(nbx, nby)
    n = counts.sum()
    # Integer marginals keep the computation exactly symmetric in the arguments.
    p = counts / n
    px = counts.sum(axis=1) / n
    py = counts.sum(axis=0) / n
    i, j = np.nonzero(counts)
    terms = p[i, j] * np.log2(p[i, j] / (px[i] * py[j]))
    return max(0.0, math.fsum(np.sort(terms)))


def _entropy_from_codes(codes, n_cells):
    p = np.bincount(codes, minlength=n_cells).astype(np.float64)
    p = p[p > 0] / len(codes)
    return max(0.0, -math.fsum(np.sort(p * np.log2(p))))


def estimate_mi(x, y, bins="auto"):
    """Plug-in mutual information in bits over an equal-frequency 2-D partition."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(x) != len(y):
        raise ValueError("series lengths differ")
    if len(x) < 10:
        raise ValueError(f"need at least 10 samples, got {len(x)}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    b = _auto_bins(len(x)) if bins == "auto" else int(bins)
    if b < 2:
        raise ValueError("bins must be >= 2")
    bx, nbx = _assign_bins(x, b)
    by, nby = _assign_bins(y, b)
    return _mi_from_codes(bx, nbx, by, nby)


def entropy_bits(x, bins="auto"):
    """Plug-in entropy in bits under the same partition as :func:`estimate_mi`."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if np.ptp(x) == 0:
        return 0.0
    b = _auto_bins(len(x)) if bins == "auto" else int(bins)
    codes, n_cells = _assign_bins(x, b)
    return _entropy_from_codes(codes, n_cells)


# ---------------------------------------------------------------------------
# Feature matrix and forward selection
# ---------------------------------------------------------------------------

@dataclass
class FeatureMatrix:
    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    record_ids: list[str] | None = None
    frame_indices: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("column count does not match feature names")
        if self.X.shape[0] != len(self.y):
            raise ValueError("label count does not match row count")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")

    def __len__(self):
        return len(self.y)

    def column(self, name):
        return self.X[:, self.feature_names.index(name)]

    def select(self, names) -> "FeatureMatrix":
        idx = [self.feature_names.index(n) for n in names]
        return FeatureMatrix(list(names), self.X[:, idx], self.y,
                             self.record_ids, self.frame_indices)

    def subset_rows(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        rid = [self.record_ids[i] for i in rows] if self.record_ids else None
        fidx = self.frame_indices[rows] if self.frame_indices is not None else None
        return FeatureMatrix(self.feature_names, self.X[rows], self.y[rows], rid, fidx)

    def to_csv(self, path, comments=()):
        with open(path, "w", newline="") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            writer = csv.writer(fh)
            writer.writerow(["record_id", "frame_index", "label"] + self.feature_names)
            for i in range(len(self)):
                rid = self.record_ids[i] if self.record_ids else ""
                fidx = int(self.frame_indices[i]) if self.frame_indices is not None else i
                writer.writerow([rid, fidx, int(self.y[i])] + [repr(float(v)) for v in self.X[i]])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        if not rows:
            raise ValueError(f"empty feature matrix {path}")
        header = rows[0]
        names = header[3:]
        rids, fidx, labels, data = [], [], [], []
        for r in rows[1:]:
            rids.append(r[0])
            fidx.append(int(r[1]))
            labels.append(int(r[2]))
            data.append([float(v) for v in r[3:]])
        return cls(names, np.array(data, dtype=np.float64), np.array(labels),
                   rids, np.array(fidx))


@dataclass
class SelectedFeatureSet:
    names: list[str]
    scores: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("selected feature names must be unique")
        if self.scores and len(self.scores) != len(self.names):
            raise ValueError("scores length does not match names")

    def __len__(self):
        return len(self.names)

    def to_csv(self, path, comments=()):
        with open(path, "w", newline="") as fh:
            for c in comments:
                fh.write(f"# {c}\n")
            writer = csv.writer(fh)
            writer.writerow(["rank", "name", "score"])
            for i, (name, score) in enumerate(zip(self.names, self.scores), start=1):
                writer.writerow([i, name, repr(float(score))])

    @classmethod
    def from_csv(cls, path) -> "SelectedFeatureSet":
        names, scores = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].startswith("#") or row[0] == "rank":
                    continue
                names.append(row[1])
                scores.append(float(row[2]))
        return cls(names, scores)


def forward_select(m: FeatureMatrix, k_max=20) -> SelectedFeatureSet:
    """Greedy forward selection by MI relevance minus mean normalized redundancy.

    The first pick maximizes MI(feature; label); subsequent picks maximize
    MI(f; label) - mean over selected s of MI(f; s)/min(H(f), H(s)).
    Selection stops at k_max or when the best criterion is non-positive.
    Ties break toward the lexicographically smaller feature name.
    """
    if k_max > len(m.feature_names):
        raise ValueError(f"k_max {k_max} exceeds feature count {len(m.feature_names)}")
    classes = np.unique(m.y)
    if len(classes) < 2:
        raise ValueError("labels contain a single class; selection needs both")

    n = len(m)
    b = _auto_bins(n)
    codes = []
    for j in range(m.X.shape[1]):
        codes.append(_assign_bins(m.X[:, j], b) if np.ptp(m.X[:, j]) > 0 else (None, 0))
    ycodes = _assign_bins(m.y, b)

    def feat_entropy(j):
        return _entropy_from_codes(*codes[j]) if codes[j][0] is not None else 0.0

    relevance = [
        _mi_from_codes(*codes[j], *ycodes) if codes[j][0] is not None else 0.0
        for j in range(m.X.shape[1])
    ]
    entropies = [feat_entropy(j) for j in range(m.X.shape[1])]
    pair_cache = {}

    def nmi(a, j):
        key = (min(a, j), max(a, j))
        if key not in pair_cache:
            if codes[a][0] is None or codes[j][0] is None:
                pair_cache[key] = 0.0
            else:
                mi_aj = _mi_from_codes(*codes[a], *codes[j])
                denom = min(entropies[a], entropies[j])
                pair_cache[key] = mi_aj / denom if denom > 0 else 0.0
        return pair_cache[key]

    remaining = list(range(m.X.shape[1]))
    selected, scores = [], []
    while remaining and len(selected) < k_max:
        if not selected:
            cand_scores = [(relevance[j], j) for j in remaining]
        else:
            cand_scores = [
                (relevance[j] - sum(nmi(s, j) for s in selected) / len(selected), j)
                for j in remaining
            ]
        best_score, best_j = max(
            cand_scores, key=lambda sj: (sj[0], _NameKey(m.feature_names[sj[1]]))
        )
        if selected and best_score <= 0:
            break
        if not selected and best_score <= 0:
            break
        selected.append(best_j)
        scores.append(best_score)
        remaining.remove(best_j)

    return SelectedFeatureSet([m.feature_names[j] for j in selected], scores)


class _NameKey(str):
    """Reverses string comparison so max() prefers the lexicographically smaller name."""

    def __lt__(self, other):
        return str.__gt__(self, other)

    def __gt__(self, other):
        return str.__lt__(self, other)
