import itertools

import numpy as np
import pytest

from osadetect.classifiers.base import Prediction
from osadetect.fusion import (
    FIXED_MEMBERS,
    RULES,
    EnsembleSpec,
    build_triples,
    fuse,
    fuse_probabilities,
)


def oracle_fuse(p, sens, spec, rule, eps=1e-6):
    """Hand-specification oracle written scalar-by-scalar."""
    decisions = [pi >= 0.5 for pi in p]
    if rule == "majority_vote":
        return sum(decisions) / 3.0
    u = [s if d else c for d, s, c in zip(decisions, sens, spec)]
    a = [ui * pi for ui, pi in zip(u, p)]
    n = [ui * (1.0 - pi) for ui, pi in zip(u, p)]
    if rule == "avg_prob":
        sa, sn = sum(a), sum(n)
    elif rule == "prod_prob":
        sa = max(a[0], eps) * max(a[1], eps) * max(a[2], eps)
        sn = max(n[0], eps) * max(n[1], eps) * max(n[2], eps)
    elif rule == "max_prob":
        sa, sn = max(a), max(n)
    total = sa + sn
    return 0.5 if total == 0 else sa / total


def spec_with(rule, quality=((1.0, 1.0),) * 3):
    return EnsembleSpec(("adaboost_stump", "bagging_rept", "knn"), rule, list(quality))


class TestHandExamples:
    def test_majority_two_to_one(self):
        out = fuse([Prediction(1.0), Prediction(1.0), Prediction(0.0)],
                   spec_with("majority_vote"))
        assert out.p_apnea == pytest.approx(2 / 3)
        assert out.decision == "apnoeic"

    def test_prod_rule_hand_arithmetic(self):
        out = fuse([Prediction(0.9), Prediction(0.8), Prediction(0.6)],
                   spec_with("prod_prob"))
        assert out.p_apnea == pytest.approx(0.432 / (0.432 + 0.008))
        assert out.decision == "apnoeic"

    def test_unanimous_all_rules(self):
        preds = [Prediction(0.7), Prediction(0.9), Prediction(0.55)]
        for rule in RULES:
            assert fuse(preds, spec_with(rule)).decision == "apnoeic"


class TestGridAgainstOracle:
    def test_rules_match_oracle_everywhere(self):
        probs = np.round(np.arange(0.0, 1.0001, 0.1), 10)
        weights = (0.5, 1.0)
        rng = np.random.default_rng(0)
        combos = list(itertools.product(probs, repeat=3))
        for p3 in combos:
            w = rng.choice(weights, size=6)  # sampled weights; exhaustive run in acceptance
            sens, spec = w[:3], w[3:]
            for rule in RULES:
                got = fuse_probabilities(np.array(p3)[:, None], sens, spec, rule)[0]
                want = oracle_fuse(p3, sens, spec, rule)
                assert got == pytest.approx(want, abs=1e-12), (rule, p3, w)

    def test_unanimity_preserved(self):
        probs = np.round(np.arange(0.0, 1.0001, 0.1), 10)
        weights = (0.5, 1.0)
        for p3 in itertools.product(probs, repeat=3):
            d = [p >= 0.5 for p in p3]
            if len(set(d)) != 1:
                continue
            want = "apnoeic" if d[0] else "normal"
            for w in itertools.product(weights, repeat=6):
                for rule in RULES:
                    q = list(zip(w[:3], w[3:]))
                    got = fuse([Prediction(p) for p in p3], spec_with(rule, q)).decision
                    assert got == want


class TestInvariances:
    def test_member_permutation_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p = rng.random(3)
            q = [(rng.uniform(0.5, 1), rng.uniform(0.5, 1)) for _ in range(3)]
            for rule in ("avg_prob", "prod_prob", "majority_vote"):
                base = fuse([Prediction(v) for v in p], spec_with(rule, q)).p_apnea
                for perm in itertools.permutations(range(3)):
                    out = fuse([Prediction(p[i]) for i in perm],
                               spec_with(rule, [q[i] for i in perm])).p_apnea
                    assert out == pytest.approx(base, abs=1e-12)

    def test_majority_ignores_calibration(self):
        q = [(0.6, 0.9), (0.7, 0.8), (0.9, 0.6)]
        a = fuse([Prediction(0.51), Prediction(0.99), Prediction(0.1)],
                 spec_with("majority_vote", q))
        b = fuse([Prediction(0.99), Prediction(0.51), Prediction(0.49)],
                 spec_with("majority_vote", q))
        assert a.p_apnea == b.p_apnea == pytest.approx(2 / 3)


class TestSpecValidation:
    def test_wrong_member_count(self):
        with pytest.raises(ValueError):
            EnsembleSpec(("a", "b"), "majority_vote", [(1, 1)] * 2)

    def test_bad_rule(self):
        with pytest.raises(ValueError):
            spec_with("median_prob")

    def test_quality_range(self):
        with pytest.raises(ValueError):
            EnsembleSpec(("a", "b", "c"), "avg_prob", [(1.5, 1.0)] * 3)

    def test_fewer_predictions_rejected(self):
        with pytest.raises(ValueError):
            fuse([Prediction(0.5), Prediction(0.4)], spec_with("avg_prob"))


class TestBuildTriples:
    def test_product_count(self):
        specs = build_triples(candidates=("knn", "decision_table"))
        assert len(specs) == 8
        assert all(s.members[:2] == FIXED_MEMBERS for s in specs)

    def test_empty_candidates(self):
        assert build_triples(candidates=()) == []

    def test_paper_grid_twenty(self):
        five = ("knn", "decision_table", "c45_tree", "rep_tree", "functional_tree")
        specs = build_triples(candidates=five)
        assert len(specs) == 20
        assert {s.rule for s in specs} == set(RULES)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            build_triples(candidates=("adaboost_stump",))
