"""Three-member classifier fusion with four combination rules.

Each member carries a quality pair (sensitivity, specificity) measured on
training-side validation.  A member's evidence is weighted by the quality
of the decision it actually made: sensitivity when it votes apnoeic,
specificity when it votes normal.  Because one scalar weight multiplies
both of a member's class probabilities, a unanimous member decision can
never be flipped by weights in (0, 1], for any of the four rules.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from osadetect.classifiers import ClassifierModel, Prediction, predict_proba_batch

RULES = ("max_prob", "avg_prob", "prod_prob", "majority_vote")
RULE_ABBREV = {"mp": "max_prob", "ap": "avg_prob", "pp": "prod_prob", "mv": "majority_vote"}
FIXED_MEMBERS = ("adaboost_stump", "bagging_rept")
PROD_EPS = 1e-6

ENSEMBLE_FORMAT = "osadetect-ensemble"
ENSEMBLE_VERSION = 1


@dataclass
class EnsembleSpec:
    members: tuple  # exactly 3 algorithm ids
    rule: str
    member_quality: list = field(default_factory=lambda: [(1.0, 1.0)] * 3)

    def __post_init__(self):
        if len(self.members) != 3:
            raise ValueError(f"ensembles have exactly 3 members, got {len(self.members)}")
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}; choose from {RULES}")
        if len(self.member_quality) != 3:
            raise ValueError("need one (sensitivity, specificity) pair per member")
        for sens, spec in self.member_quality:
            if not (0.0 <= sens <= 1.0 and 0.0 <= spec <= 1.0):
                raise ValueError("quality values must lie in [0, 1]")


def fuse_probabilities(p, sens, spec, rule):
    """Fused apnoeic probability for member probabilities ``p`` of shape (3, n)."""
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    if p.shape[0] != 3:
        raise ValueError(f"need probabilities from exactly 3 members, got {p.shape[0]}")
    decisions = p >= 0.5
    if rule == "majority_vote":
        return decisions.mean(axis=0)

    sens = np.asarray(sens, dtype=np.float64)[:, None]
    spec = np.asarray(spec, dtype=np.float64)[:, None]
    u = np.where(decisions, sens, spec)  # weight of the decision each member made
    a_side = u * p
    n_side = u * (1.0 - p)
    if rule == "avg_prob":
        score_a = a_side.sum(axis=0)
        score_n = n_side.sum(axis=0)
    elif rule == "prod_prob":
        score_a = np.prod(np.maximum(a_side, PROD_EPS), axis=0)
        score_n = np.prod(np.maximum(n_side, PROD_EPS), axis=0)
    elif rule == "max_prob":
        score_a = a_side.max(axis=0)
        score_n = n_side.max(axis=0)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    total = score_a + score_n
    return np.where(total > 0, score_a / np.where(total > 0, total, 1.0), 0.5)


def fuse(predictions, spec: EnsembleSpec) -> Prediction:
    """Combine three member predictions under the spec's rule and weights."""
    if len(predictions) != 3:
        raise ValueError(f"need exactly 3 predictions, got {len(predictions)}")
    p = np.array([[pr.p_apnea] for pr in predictions])
    sens = [q[0] for q in spec.member_quality]
    specificity = [q[1] for q in spec.member_quality]
    fused = fuse_probabilities(p, sens, specificity, spec.rule)
    return Prediction(float(np.clip(fused[0], 0.0, 1.0)))


def build_triples(fixed=FIXED_MEMBERS, candidates=(), rules=RULES) -> list[EnsembleSpec]:
    """One EnsembleSpec per (third member, rule), fixed members first."""
    fixed = tuple(fixed)
    if any(c in fixed for c in candidates):
        raise ValueError("candidates must be disjoint from the fixed members")
    return [
        EnsembleSpec(members=fixed + (third,), rule=rule)
        for third in candidates
        for rule in rules
    ]


@dataclass
class EnsembleModel:
    members: list  # 3 trained ClassifierModels
    rule: str
    member_quality: list

    def __post_init__(self):
        if len(self.members) != 3 or len(self.member_quality) != 3:
            raise ValueError("ensemble needs exactly 3 members with quality pairs")

    @property
    def feature_names(self):
        return self.members[0].feature_names

    def spec(self) -> EnsembleSpec:
        return EnsembleSpec(tuple(m.algorithm for m in self.members), self.rule,
                            list(self.member_quality))

    def predict_proba_batch(self, X):
        p = np.vstack([predict_proba_batch(m, X) for m in self.members])
        sens = [q[0] for q in self.member_quality]
        spec = [q[1] for q in self.member_quality]
        return np.clip(fuse_probabilities(p, sens, spec, self.rule), 0.0, 1.0)

    def to_dict(self):
        return {
            "format": ENSEMBLE_FORMAT,
            "version": ENSEMBLE_VERSION,
            "rule": self.rule,
            "member_quality": [list(q) for q in self.member_quality],
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != ENSEMBLE_FORMAT:
            raise ValueError("not an osadetect ensemble document")
        members = [ClassifierModel.from_dict(m) for m in d["members"]]
        return cls(members, d["rule"], [tuple(q) for q in d["member_quality"]])


def save_ensemble(model: EnsembleModel, path, extra=None):
    doc = model.to_dict()
    if extra:
        doc["meta"] = extra
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_ensemble(path) -> EnsembleModel:
    with open(path) as fh:
        return EnsembleModel.from_dict(json.load(fh))
