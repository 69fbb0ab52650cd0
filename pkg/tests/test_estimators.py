import numpy as np
import pytest
from sklearn.base import clone
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline
from sklearn.utils.validation import check_is_fitted

from drbm import (
    DeepBeliefNetwork,
    MultinaryRBM,
    forward_means,
    hidden_mean,
    linear_probe_accuracy,
)


def two_cluster_data(seed=0, count=60, features=12):
    """Binary rows concentrated around two complementary templates."""
    rng = np.random.default_rng(seed)
    half = features // 2
    a = np.r_[np.ones(half), np.zeros(features - half)]
    y = rng.integers(0, 2, count)
    base = np.where(y[:, None] == 1, a, 1.0 - a)
    flips = rng.random((count, features)) < 0.05
    return np.abs(base - flips).astype(np.float64), y


class TestMultinaryRBM:
    def test_get_set_params_round_trip(self):
        est = MultinaryRBM(n_components=5, n_levels=4, learning_rate=0.01)
        params = est.get_params()
        assert params["n_components"] == 5
        assert params["n_levels"] == 4
        other = MultinaryRBM().set_params(**params)
        assert other.get_params() == params

    def test_clone(self):
        est = MultinaryRBM(n_components=3, n_iter=2)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_fit_sets_attributes(self):
        X, _ = two_cluster_data()
        est = MultinaryRBM(n_components=4, n_iter=3).fit(X)
        check_is_fitted(est, "rbm_")
        assert est.n_features_in_ == 12
        assert est.components_.shape == (4, 12)
        assert est.intercept_visible_.shape == (12,)
        assert est.intercept_hidden_.shape == (4,)
        assert len(est.training_reports_) == 3

    def test_transform_is_hidden_mean(self):
        X, _ = two_cluster_data()
        est = MultinaryRBM(n_components=4, n_iter=2).fit(X)
        np.testing.assert_allclose(
            est.transform(X), hidden_mean(est.rbm_, X), rtol=1e-14
        )

    def test_deterministic_in_random_state(self):
        X, _ = two_cluster_data()
        a = MultinaryRBM(n_components=4, n_iter=3, random_state=5).fit(X)
        b = MultinaryRBM(n_components=4, n_iter=3, random_state=5).fit(X)
        c = MultinaryRBM(n_components=4, n_iter=3, random_state=6).fit(X)
        np.testing.assert_array_equal(a.components_, b.components_)
        assert np.any(a.components_ != c.components_)

    def test_rejects_out_of_range_values(self):
        X = np.full((4, 6), 3.0)
        with pytest.raises(ValueError):
            MultinaryRBM(visible_levels=1, n_iter=1).fit(X)

    def test_multinary_visible_data_accepted(self):
        rng = np.random.default_rng(3)
        X = rng.integers(0, 5, (30, 8)).astype(np.float64)
        est = MultinaryRBM(
            n_components=3, visible_levels=4, n_levels=4, n_iter=2
        ).fit(X)
        assert est.transform(X).shape == (30, 3)

    def test_transform_before_fit_raises(self):
        with pytest.raises(Exception):
            MultinaryRBM().transform(np.zeros((2, 3)))

    def test_pipeline_with_classifier(self):
        X, y = two_cluster_data(count=80)
        pipe = make_pipeline(
            MultinaryRBM(n_components=6, n_iter=10, random_state=0),
            LogisticRegression(max_iter=500),
        )
        pipe.fit(X[:60], y[:60])
        assert pipe.score(X[60:], y[60:]) >= 0.8


class TestDeepBeliefNetwork:
    def test_fit_transform_shapes(self):
        X, _ = two_cluster_data()
        est = DeepBeliefNetwork(architecture="dense:6,dense:3", n_iter=2).fit(X)
        assert est.model_ is not None
        assert len(est.model_.layers) == 2
        out = est.transform(X)
        assert out.shape == (60, 3)

    def test_transform_matches_forward_means(self):
        X, _ = two_cluster_data()
        est = DeepBeliefNetwork(architecture="dense:5", n_iter=2).fit(X)
        np.testing.assert_allclose(
            est.transform(X), forward_means(est.model_, X), rtol=1e-14
        )

    def test_conv_architecture_with_input_shape(self):
        rng = np.random.default_rng(1)
        X = rng.integers(0, 2, (20, 81)).astype(np.float64)
        est = DeepBeliefNetwork(
            architecture="conv:4x3s2",
            input_shape=(1, 9, 9),
            n_iter=2,
        ).fit(X)
        out = est.transform(X)
        # (9-3)/2+1 = 4 hidden map per channel, flattened
        assert out.shape == (20, 4 * 4 * 4)

    def test_clone_and_params(self):
        est = DeepBeliefNetwork(architecture="dense:7", n_levels=4, n_iter=1)
        twin = clone(est)
        assert twin.get_params()["architecture"] == "dense:7"
        assert twin.get_params()["n_levels"] == 4

    def test_deterministic(self):
        X, _ = two_cluster_data()
        a = DeepBeliefNetwork(architecture="dense:4", n_iter=2, random_state=1).fit(X)
        b = DeepBeliefNetwork(architecture="dense:4", n_iter=2, random_state=1).fit(X)
        np.testing.assert_array_equal(
            a.model_.layers[0].weights, b.model_.layers[0].weights
        )


class TestLinearProbe:
    def test_separable_features_score_high(self):
        X, y = two_cluster_data(count=120)
        acc = linear_probe_accuracy(X[:80], y[:80], X[80:], y[80:])
        assert acc >= 0.9

    def test_chance_level_on_noise(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 5))
        y = rng.integers(0, 2, 200)
        acc = linear_probe_accuracy(X[:100], y[:100], X[100:], y[100:])
        assert 0.2 <= acc <= 0.8
