import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from whichwrist.features import FeatureMatrix
from whichwrist.models import (
    DEFAULT_HYPERPARAMETERS,
    MODEL_KINDS,
    ModelError,
    ModelSpec,
    predict,
    train_model,
)
from whichwrist.models.linear import (
    add_intercept,
    logistic_gradient,
    logistic_loss,
)
from whichwrist.models.svm import fit_svm, quad_kernel
from whichwrist.models.tree import fit_boosted, fit_tree


def make_matrix(features, labels, categories=None):
    names = tuple(features)
    values = np.column_stack(
        [np.asarray(features[n], dtype=np.float64) for n in names])
    n = len(values)
    return FeatureMatrix(
        values=values,
        labels=np.asarray(labels, dtype=np.int64),
        window_ids=np.arange(n, dtype=np.int64),
        hands=tuple("left" for _ in range(n)),
        window_starts=np.zeros(n, dtype=np.int64),
        window_len_s=60,
        device_setting="configured_per_hand",
        categories=categories or {},
        feature_names=names,
    )


def random_matrix(rng, n=40, d=3):
    feats = {f"f{i}": rng.normal(size=n) for i in range(d)}
    labels = np.concatenate([np.zeros(n // 2), np.ones(n - n // 2)])
    return make_matrix(feats, rng.permutation(labels).astype(np.int64))


XOR = make_matrix({"a": [0.0, 0, 1, 1], "b": [0.0, 1, 0, 1]}, [0, 1, 1, 0])


class TestModelSpec:
    def test_defaults_merged(self):
        spec = ModelSpec("boosted_trees", {"n_learners": 5})
        assert spec.hyperparameters["n_learners"] == 5
        assert spec.hyperparameters["learning_rate"] == 0.1

    def test_unknown_kind(self):
        with pytest.raises(ModelError, match="unknown model kind"):
            ModelSpec("random_forest")

    def test_unknown_hyperparameter(self):
        with pytest.raises(ModelError, match="max_depth"):
            ModelSpec("decision_tree", {"max_depth": 3})

    def test_nonpositive_rejected(self):
        with pytest.raises(ModelError, match="positive"):
            ModelSpec("knn", {"k": 0})

    def test_integer_params_stay_integers(self):
        with pytest.raises(ModelError, match="integer"):
            ModelSpec("knn", {"k": 2.5})

    def test_every_kind_has_defaults(self):
        assert set(DEFAULT_HYPERPARAMETERS) == set(MODEL_KINDS)
        for kind in MODEL_KINDS:
            ModelSpec(kind)


class TestTrainDispatch:
    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_single_class_rejected(self, kind):
        matrix = make_matrix({"x": [1.0, 2, 3, 4]}, [1, 1, 1, 1])
        with pytest.raises(ModelError, match="single-class training data"):
            train_model(matrix, ModelSpec(kind))

    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_refit_is_deterministic(self, kind):
        rng = np.random.default_rng(7)
        matrix = random_matrix(rng, n=30)
        spec = ModelSpec(kind)
        p1 = predict(train_model(matrix, spec), matrix)
        p2 = predict(train_model(matrix, spec), matrix)
        assert np.array_equal(p1, p2)

    def test_missing_column_named(self):
        matrix = make_matrix({"x": [0.0, 1, 2, 3], "y": [1.0, 0, 1, 0]},
                             [0, 0, 1, 1])
        model = train_model(matrix, ModelSpec("decision_tree"))
        with pytest.raises(ModelError, match="missing columns: y"):
            predict(model, matrix.select_features(["x"]))

    def test_extra_column_named(self):
        small = make_matrix({"x": [0.0, 1, 2, 3]}, [0, 0, 1, 1])
        wide = make_matrix({"x": [0.0, 1, 2, 3], "z": [0.0] * 4}, [0, 0, 1, 1])
        model = train_model(small, ModelSpec("knn", {"k": 1}))
        with pytest.raises(ModelError, match="extra columns: z"):
            predict(model, wide)

    def test_column_order_does_not_matter(self):
        matrix = make_matrix({"x": [0.0, 1, 2, 3], "y": [5.0, 4, 3, 2]},
                             [0, 0, 1, 1])
        model = train_model(matrix, ModelSpec("logistic_regression"))
        swapped = matrix.select_features(["y", "x"])
        assert np.array_equal(predict(model, swapped), predict(model, matrix))

    def test_category_table_mismatch(self):
        cats = {"site": ("home", "office", "gym")}
        matrix = make_matrix({"site": [0.0, 1, 2, 0]}, [0, 1, 1, 0],
                             categories=cats)
        model = train_model(matrix, ModelSpec("gaussian_nb"))
        other = make_matrix({"site": [0.0, 1, 2, 0]}, [0, 1, 1, 0],
                            categories={"site": ("home", "office", "park")})
        with pytest.raises(ModelError, match="category table mismatch"):
            predict(model, other)


class TestDecisionTree:
    def test_threshold_separable_is_pure(self):
        matrix = make_matrix({"x": [-3.0, -2, -1, 1, 2, 3],
                              "noise": [0.1, 0.5, 0.3, 0.2, 0.4, 0.6]},
                             [0, 0, 0, 1, 1, 1])
        model = train_model(matrix, ModelSpec("decision_tree"))
        assert np.array_equal(predict(model, matrix), matrix.labels)
        assert model.inner.n_splits == 1
        assert model.inner.root.threshold == 0.0

    def test_every_split_strictly_reduces_gini(self):
        rng = np.random.default_rng(3)
        matrix = random_matrix(rng, n=60, d=4)
        model = train_model(matrix, ModelSpec("decision_tree"))
        assert model.inner.n_splits > 0
        assert all(g > 0.0 for g in model.inner.split_gains)

    def test_xor_admits_no_strict_gain_split(self):
        # every first split on the XOR square leaves Gini exactly unchanged,
        # so the tree stays a single leaf rather than splitting on a wash
        model = train_model(XOR, ModelSpec("decision_tree"))
        assert model.inner.n_splits == 0
        assert model.inner.root.is_leaf

    def test_coarse_tree_split_budget(self):
        rng = np.random.default_rng(5)
        matrix = random_matrix(rng, n=80, d=4)
        model = train_model(matrix, ModelSpec("coarse_tree"))
        assert model.inner.n_splits <= 4

    def test_best_first_takes_largest_gain(self):
        # two informative features, one perfectly separating: with a budget of
        # one split the tree must pick the perfect one
        matrix = make_matrix(
            {"weak": [0.0, 0, 1, 1, 0, 1, 0, 1],
             "strong": [0.0, 0, 0, 0, 1, 1, 1, 1]},
            [0, 0, 0, 0, 1, 1, 1, 1])
        model = train_model(matrix, ModelSpec("decision_tree", {"max_splits": 1}))
        assert model.inner.root.feature == 1

    def test_categorical_subset_split(self):
        cats = {"site": ("home", "office", "gym", "park")}
        codes = [0.0, 1, 2, 3, 0, 1, 2, 3]
        labels = [1, 0, 0, 1, 1, 0, 0, 1]
        matrix = make_matrix({"site": codes}, labels, categories=cats)
        model = train_model(matrix, ModelSpec("decision_tree"))
        assert np.array_equal(predict(model, matrix), matrix.labels)
        assert model.inner.n_splits == 1
        assert model.inner.root.left_codes == frozenset({1, 2})

    def test_unseen_category_goes_right(self):
        cats = {"site": ("home", "office", "gym")}
        matrix = make_matrix({"site": [0.0, 0, 1, 1]}, [0, 0, 1, 1],
                             categories=cats)
        model = train_model(matrix, ModelSpec("decision_tree"))
        probe = make_matrix({"site": [2.0]}, [0], categories=cats)
        pred = predict(model, probe)
        right = model.inner.root.right.prediction
        assert pred[0] == right

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_gain_positivity_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 50))
        x = rng.normal(size=(n, 3))
        y = rng.integers(0, 2, size=n).astype(np.int64)
        if len(np.unique(y)) < 2:
            y[0] = 1 - y[0]
        tree = fit_tree(x, y, (False, False, False), max_splits=100)
        assert all(g > 0.0 for g in tree.split_gains)


class TestBoostedTrees:
    def test_halts_when_no_learner_beats_chance(self):
        model = train_model(XOR, ModelSpec("boosted_trees"))
        assert model.inner.learners == []

    def test_learner_errors_below_half(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(50, 3))
        y = (x[:, 0] + 0.3 * rng.normal(size=50) > 0).astype(np.int64)
        if len(np.unique(y)) < 2:
            pytest.skip("degenerate draw")
        model = fit_boosted(x, y, (False,) * 3, n_learners=10, max_splits=2,
                            learning_rate=0.1)
        assert len(model.learners) > 0
        assert all(a > 0.0 for a in model.alphas)

    def test_boosting_fits_separable(self):
        matrix = make_matrix({"x": [-2.0, -1, -0.5, 0.5, 1, 2]}, [0, 0, 0, 1, 1, 1])
        model = train_model(matrix, ModelSpec("boosted_trees"))
        assert np.array_equal(predict(model, matrix), matrix.labels)


class TestQuadraticSvm:
    def test_two_point_separable_zero_training_error(self):
        matrix = make_matrix({"x": [0.0, 1.0]}, [0, 1])
        model = train_model(matrix, ModelSpec("quadratic_svm"))
        assert np.array_equal(predict(model, matrix), matrix.labels)

    def test_box_constraints_exact(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(20, 2))
        y = rng.integers(0, 2, size=20).astype(np.int64)
        y[:2] = [0, 1]
        svm = fit_svm(x, y, c=1.0)
        assert np.all(svm.alpha >= 0.0)
        assert np.all(svm.alpha <= 1.0)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_kkt_residual_small_instances(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(20, 3))
        y = (x[:, 0] + 0.5 * rng.normal(size=20) > 0).astype(np.int64)
        if len(np.unique(y)) < 2:
            y[0] = 1 - y[0]
        svm = fit_svm(x, y, c=1.0, tol=1e-3)
        assert svm.kkt_residual() <= 1e-3

    def test_kernel_value(self):
        a = np.array([[1.0, 2.0]])
        b = np.array([[3.0, -1.0]])
        assert quad_kernel(a, b)[0, 0] == (1 + 1 * 3 + 2 * -1) ** 2

    def test_margins_on_hand_checked_pair(self):
        # on two z-scored points the dual solution is alpha = (1/4, 1/4),
        # bias 0, giving decision values of exactly -1 and +1
        x = np.array([[-1.0], [1.0]])
        svm = fit_svm(x, np.array([0, 1]))
        np.testing.assert_allclose(svm.decision_value(x), [-1.0, 1.0])
        np.testing.assert_allclose(svm.alpha, [0.25, 0.25])
        assert svm.bias == 0.0

    def test_refit_bit_identical(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(30, 3))
        y = (x[:, 1] > 0.2).astype(np.int64)
        a = fit_svm(x, y)
        b = fit_svm(x, y)
        assert np.array_equal(a.alpha, b.alpha)
        assert a.bias == b.bias


class TestKnn:
    def test_one_nn_returns_own_label(self):
        rng = np.random.default_rng(4)
        matrix = random_matrix(rng, n=20)
        model = train_model(matrix, ModelSpec("knn", {"k": 1}))
        assert np.array_equal(predict(model, matrix), matrix.labels)

    def test_vote_tie_goes_nondominant(self):
        matrix = make_matrix({"x": [-1.0, 1.0]}, [0, 1])
        model = train_model(matrix, ModelSpec("knn", {"k": 2}))
        probe = make_matrix({"x": [0.0, 0.0]}, [0, 1])
        assert predict(model, probe).tolist() == [0, 0]

    def test_k_capped_at_training_size(self):
        # k=10 against 4 rows degrades to voting over everything: balanced
        # labels make every query a 2-2 tie, resolved toward class 0
        matrix = make_matrix({"x": [-1.0, -2, 1, 2]}, [0, 0, 1, 1])
        model = train_model(matrix, ModelSpec("knn"))
        assert predict(model, matrix).tolist() == [0, 0, 0, 0]


class TestGaussianNb:
    def test_symmetric_classes_split_at_midpoint(self):
        matrix = make_matrix({"x": [-3.0, -1.0, 1.0, 3.0]}, [0, 0, 1, 1])
        model = train_model(matrix, ModelSpec("gaussian_nb"))
        probe = make_matrix({"x": [-0.25, 0.25]}, [0, 1])
        assert predict(model, probe).tolist() == [0, 1]

    def test_exact_tie_goes_nondominant(self):
        matrix = make_matrix({"x": [-3.0, -1.0, 1.0, 3.0]}, [0, 0, 1, 1])
        model = train_model(matrix, ModelSpec("gaussian_nb"))
        probe = make_matrix({"x": [0.0]}, [1])
        assert predict(model, probe).tolist() == [0]

    def test_variance_floor_handles_constant_feature(self):
        matrix = make_matrix({"x": [0.0, 0, 1, 1], "flat": [2.0, 2, 2, 2]},
                             [0, 0, 1, 1])
        model = train_model(matrix, ModelSpec("gaussian_nb"))
        assert np.array_equal(predict(model, matrix), matrix.labels)


class TestLogisticRegression:
    def test_fits_separable_scaled_data(self):
        matrix = make_matrix({"x": [-40.0, -20, -10, 10, 20, 40]},
                             [0, 0, 0, 1, 1, 1])
        model = train_model(matrix, ModelSpec("logistic_regression"))
        assert np.array_equal(predict(model, matrix), matrix.labels)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradient_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 15, 3
        x = add_intercept(rng.normal(size=(n, d)))
        y = rng.integers(0, 2, size=n).astype(float)
        w = rng.normal(size=d + 1)
        l2 = 1e-4
        grad = logistic_gradient(w, x, y, l2)
        h = 1e-5
        fd = np.empty_like(grad)
        for i in range(len(w)):
            up, dn = w.copy(), w.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (logistic_loss(up, x, y, l2) - logistic_loss(dn, x, y, l2)) / (2 * h)
        rel = np.linalg.norm(fd - grad) / np.linalg.norm(grad)
        assert rel <= 1e-5

    def test_gradient_near_zero_at_optimum(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(40, 2))
        y = (x[:, 0] + x[:, 1] > 0).astype(float)
        from whichwrist.models.linear import fit_logistic
        model = fit_logistic(x, y)
        grad = logistic_gradient(model.weights, add_intercept(x), y, 1e-4)
        assert np.max(np.abs(grad)) <= 1e-6
