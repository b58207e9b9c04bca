import json

import numpy as np
import pytest

from osadetect import classifiers as clf
from osadetect.classifiers.base import Prediction, laplace
from osadetect.classifiers.trees import grow_tree, tree_depth
from osadetect.mi import FeatureMatrix


def separable_matrix(rng, n=300, d=4):
    y = rng.integers(0, 2, n)
    X = np.column_stack([y * 3.0 + rng.normal(0, 0.5, n) for _ in range(d)])
    return FeatureMatrix([f"f{i}" for i in range(d)], X, y)


def noisy_matrix(rng, n=400, d=5):
    y = rng.integers(0, 2, n)
    X = np.column_stack(
        [y + rng.normal(0, 1.2, n), rng.normal(size=n)]
        + [y * 0.5 + rng.normal(0, 1.0, n) for _ in range(d - 2)]
    )
    return FeatureMatrix([f"f{i}" for i in range(d)], X, y)


class TestPrediction:
    def test_threshold_rule(self):
        assert Prediction(0.5).decision == "apnoeic"
        assert Prediction(0.4999).decision == "normal"
        assert Prediction(1.0).decision == "apnoeic"

    def test_range_enforced(self):
        with pytest.raises(ValueError):
            Prediction(1.2)


class TestTrainValidation:
    def test_single_class_rejected(self):
        m = FeatureMatrix(["a"], np.random.default_rng(0).normal(size=(30, 1)),
                          np.ones(30, dtype=int))
        with pytest.raises(ValueError):
            clf.train("knn", m)

    def test_non_finite_names_feature(self):
        X = np.random.default_rng(1).normal(size=(30, 2))
        X[4, 1] = np.nan
        m = FeatureMatrix(["good", "bad"], X, np.arange(30) % 2)
        with pytest.raises(ValueError, match="bad"):
            clf.train("c45_tree", m)

    def test_even_k_rejected(self):
        m = separable_matrix(np.random.default_rng(2))
        with pytest.raises(ValueError):
            clf.train("knn", m, {"k": 4})

    def test_unknown_algorithm(self):
        m = separable_matrix(np.random.default_rng(3))
        with pytest.raises(ValueError):
            clf.train("svm", m)

    def test_unknown_hyper_rejected(self):
        m = separable_matrix(np.random.default_rng(4))
        with pytest.raises(ValueError):
            clf.train("knn", m, {"gamma": 1})


class TestKNN:
    def test_k1_training_point_returns_label(self):
        rng = np.random.default_rng(5)
        m = separable_matrix(rng)
        model = clf.train("knn", m, {"k": 1})
        for i in (0, 10, 25):
            assert clf.predict_proba(model, m.X[i]).p_apnea == float(m.y[i])

    def test_k3_counting_rule(self):
        X = np.array([[0.0], [0.1], [0.2], [10.0]])
        y = np.array([1, 1, 0, 0])
        m = FeatureMatrix(["a"], X, y)
        model = clf.train("knn", m, {"k": 3})
        assert clf.predict_proba(model, np.array([0.05])).p_apnea == pytest.approx(2 / 3)

    def test_affine_rescaling_invariance(self):
        # powers of two keep the affine map exact in float64
        rng = np.random.default_rng(6)
        m = noisy_matrix(rng)
        model_a = clf.train("knn", m)
        X2 = m.X.copy()
        X2[:, 0] = 4.0 * X2[:, 0] + 8.0
        model_b = clf.train("knn", FeatureMatrix(m.feature_names, X2, m.y))
        q = rng.normal(size=(20, len(m.feature_names)))
        q2 = q.copy()
        q2[:, 0] = 4.0 * q2[:, 0] + 8.0
        assert np.array_equal(clf.predict_proba_batch(model_a, q),
                              clf.predict_proba_batch(model_b, q2))

    def test_missing_feature_error(self):
        m = separable_matrix(np.random.default_rng(7))
        model = clf.train("knn", m)
        with pytest.raises(ValueError, match="missing"):
            clf.predict_proba(model, {"f0": 1.0, "f1": 2.0})


class TestTrees:
    def test_laplace_leaf_probability(self):
        assert laplace(7, 1) == pytest.approx(0.8)

    def test_c45_splits_on_determining_feature(self):
        rng = np.random.default_rng(8)
        X = np.column_stack([rng.normal(size=200), rng.normal(size=200),
                             np.repeat([0.0, 1.0], 100)])
        y = X[:, 2].astype(int)
        model = clf.train("c45_tree", FeatureMatrix(["a", "b", "z"], X, y))
        tree = model.impl.tree
        assert not tree["leaf"]
        assert tree["feature"] == 2
        assert tree_depth(tree) == 1

    def test_monotone_transform_invariance_training_predictions(self):
        rng = np.random.default_rng(9)
        m = noisy_matrix(rng, n=250)
        for algo in ("c45_tree", "rep_tree"):
            base = clf.train(algo, m, seed=5)
            X2 = m.X.copy()
            X2[:, 0] = np.exp(X2[:, 0])  # strictly monotone on one feature
            warped = clf.train(algo, FeatureMatrix(m.feature_names, X2, m.y), seed=5)
            p_base = clf.predict_proba_batch(base, m.X)
            p_warp = clf.predict_proba_batch(warped, X2)
            assert np.array_equal(p_base, p_warp), algo

    def test_rep_tree_prunes(self):
        rng = np.random.default_rng(10)
        y = rng.integers(0, 2, 400)
        X = rng.normal(size=(400, 6))  # pure noise: pruning should cut the tree down hard
        pruned = clf.train("rep_tree", FeatureMatrix([f"f{i}" for i in range(6)], X, y), seed=3)
        unpruned = grow_tree(X, y, min_leaf=2, max_depth=None, use_gain_ratio=False)
        assert tree_depth(pruned.impl.tree) <= tree_depth(unpruned) / 2

    def test_min_leaf_respected(self):
        rng = np.random.default_rng(11)
        m = separable_matrix(rng, n=60)
        model = clf.train("c45_tree", m, {"min_leaf": 10})

        def check(node):
            if node["leaf"]:
                assert node["n_pos"] + node["n_neg"] >= 10
            else:
                check(node["left"])
                check(node["right"])

        check(model.impl.tree)


class TestAdaBoost:
    def test_separable_zero_error_round_one(self):
        rng = np.random.default_rng(12)
        x = rng.normal(size=(200, 1))
        y = (x[:, 0] > 0.3).astype(int)
        if len(np.unique(y)) < 2:
            y[0] = 1 - y[0]
        m = FeatureMatrix(["a"], x, y)
        model = clf.train("adaboost_stump", m)
        assert len(model.impl.stumps) == 1
        pred = clf.predict_proba_batch(model, x) >= 0.5
        assert np.array_equal(pred, y.astype(bool))

    def test_training_error_bound(self):
        rng = np.random.default_rng(13)
        m = noisy_matrix(rng, n=300)
        model = clf.train("adaboost_stump", m, {"rounds": 30})
        eps = np.array(model.impl.train_epsilons)
        assert len(eps) > 1
        bound = np.prod(2.0 * np.sqrt(eps * (1.0 - eps)))
        pred = clf.predict_proba_batch(model, m.X) >= 0.5
        train_err = np.mean(pred != m.y.astype(bool))
        assert train_err <= bound + 1e-12

    def test_margin_probability_link(self):
        rng = np.random.default_rng(14)
        m = noisy_matrix(rng)
        model = clf.train("adaboost_stump", m)
        margins = model.impl.margin(m.X)
        p = clf.predict_proba_batch(model, m.X)
        with np.errstate(over="ignore"):
            assert np.allclose(p, 1 / (1 + np.exp(-2 * margins)))


class TestBagging:
    def test_same_seed_identical_serialization(self):
        rng = np.random.default_rng(15)
        m = noisy_matrix(rng)
        a = clf.train("bagging_rept", m, seed=7)
        b = clf.train("bagging_rept", m, seed=7)
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)

    def test_different_seed_differs(self):
        rng = np.random.default_rng(16)
        m = noisy_matrix(rng)
        a = clf.train("bagging_rept", m, seed=1)
        b = clf.train("bagging_rept", m, seed=2)
        assert json.dumps(a.to_dict()) != json.dumps(b.to_dict())

    def test_probability_is_vote_fraction(self):
        rng = np.random.default_rng(17)
        m = noisy_matrix(rng)
        model = clf.train("bagging_rept", m, {"rounds": 10})
        p = clf.predict_proba_batch(model, m.X[:30])
        assert np.all(np.isin(np.round(p * 10), np.arange(11)))


class TestDecisionTable:
    def test_learns_separable_data(self):
        rng = np.random.default_rng(18)
        m = separable_matrix(rng)
        model = clf.train("decision_table", m)
        acc = np.mean((clf.predict_proba_batch(model, m.X) >= 0.5) == m.y.astype(bool))
        assert acc >= 0.95
        assert len(model.impl.subset) >= 1

    def test_unmatched_row_nearest_cell(self):
        rng = np.random.default_rng(19)
        m = separable_matrix(rng)
        model = clf.train("decision_table", m)
        far = np.full((1, 4), 1e6)  # far outside every bin
        p = clf.predict_proba_batch(model, far)
        assert 0.0 <= p[0] <= 1.0


class TestSerializationRoundTrip:
    @pytest.mark.parametrize("algo", clf.ALGORITHMS)
    def test_bit_identical_predictions(self, algo, tmp_path):
        rng = np.random.default_rng(20)
        m = noisy_matrix(rng)
        model = clf.train(algo, m, seed=9)
        path = str(tmp_path / f"{algo}.json")
        clf.save_model(model, path)
        back = clf.load_model(path)
        probe = rng.normal(size=(40, len(m.feature_names)))
        assert np.array_equal(clf.predict_proba_batch(model, probe),
                              clf.predict_proba_batch(back, probe))

    @pytest.mark.parametrize("algo", clf.ALGORITHMS)
    def test_deterministic_given_seed(self, algo):
        rng = np.random.default_rng(21)
        m = noisy_matrix(rng)
        a = clf.train(algo, m, seed=4)
        b = clf.train(algo, m, seed=4)
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)


class TestModelQuality:
    def test_formulas(self):
        rng = np.random.default_rng(22)
        m = separable_matrix(rng)
        model = clf.train("knn", m)
        sens, spec = clf.model_quality(model, m)
        assert sens == pytest.approx(1.0, abs=0.05)
        assert spec == pytest.approx(1.0, abs=0.05)

    def test_single_class_holdout_absent_metric(self):
        rng = np.random.default_rng(23)
        m = separable_matrix(rng)
        model = clf.train("knn", m)
        rows = np.flatnonzero(m.y == 1)
        sens, spec = clf.model_quality(model, m.subset_rows(rows))
        assert sens is not None
        assert spec is None

    def test_constant_apnoeic_model(self):
        # zero features + k covering (almost) everything: constant majority output
        y = np.array([1] * 40 + [0] * 20)
        m = FeatureMatrix(["a", "b"], np.zeros((60, 2)), y)
        always = clf.train("knn", m, {"k": 59})
        assert np.all(clf.predict_proba_batch(always, m.X) >= 0.5)
        sens, spec = clf.model_quality(always, m)
        assert sens == 1.0
        assert spec == 0.0

    def test_probabilities_in_range(self):
        rng = np.random.default_rng(24)
        m = noisy_matrix(rng)
        probe = rng.normal(size=(50, len(m.feature_names)))
        for algo in clf.ALGORITHMS:
            model = clf.train(algo, m)
            p = clf.predict_proba_batch(model, probe)
            assert np.all((p >= 0) & (p <= 1)), algo
