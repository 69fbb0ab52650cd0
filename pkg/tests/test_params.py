import numpy as np
import pytest

from drbm import (
    ActivationSpec,
    ConvRbmParams,
    DbnModel,
    GradientSet,
    RbmParams,
    init_conv_params,
    init_params,
    validate,
    validate_conv,
    validate_model,
)

from helpers import random_rbm


class TestInit:
    def test_shapes(self):
        p = init_params(7, 5)
        assert p.visible_bias.shape == (7,)
        assert p.hidden_bias.shape == (5,)
        assert p.weights.shape == (7, 5)
        assert p.n_visible == 7
        assert p.n_hidden == 5

    def test_zero_biases_small_weights(self):
        p = init_params(20, 30, seed=3)
        assert np.all(p.visible_bias == 0.0)
        assert np.all(p.hidden_bias == 0.0)
        assert 0.0 < np.abs(p.weights).max() < 0.1

    def test_deterministic_in_seed(self):
        a = init_params(6, 4, seed=11)
        b = init_params(6, 4, seed=11)
        c = init_params(6, 4, seed=12)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert np.any(a.weights != c.weights)

    def test_scale_shrinks_with_level_count(self):
        narrow = init_params(50, 50, visible_spec=ActivationSpec(255), seed=0)
        wide = init_params(50, 50, visible_spec=ActivationSpec(1), seed=0)
        assert np.abs(narrow.weights).std() < np.abs(wide.weights).std()

    def test_conv_shapes(self):
        p = init_conv_params(3, 8, kernel_size=4, stride=2, input_size=(16, 16))
        assert p.filters.shape == (8, 3, 4, 4)
        assert p.hidden_bias.shape == (8,)
        assert p.visible_bias.shape == (3,)
        assert p.stride == 2
        assert p.input_size == (16, 16)
        assert p.out_channels == 8
        assert p.in_channels == 3
        assert p.kernel_size == 4


class TestGradientSet:
    def test_negation(self):
        g = GradientSet(np.array([1.0, -2.0]), np.array([3.0]), np.ones((2, 1)))
        n = -g
        np.testing.assert_array_equal(n.d_visible_bias, [-1.0, 2.0])
        np.testing.assert_array_equal(n.d_hidden_bias, [-3.0])
        np.testing.assert_array_equal(n.d_weights, -np.ones((2, 1)))


class TestValidate:
    def test_clean_layer_passes(self):
        assert validate(random_rbm(0)) == []

    def test_shape_mismatch_reported(self):
        p = random_rbm(0, n_visible=4, n_hidden=3)
        bad = RbmParams(
            p.visible_bias,
            p.hidden_bias,
            np.zeros((4, 5)),
            p.visible_spec,
            p.hidden_spec,
        )
        problems = validate(bad)
        assert len(problems) == 1
        assert "weights" in problems[0]

    def test_nan_located(self):
        p = random_rbm(0)
        w = p.weights.copy()
        w[2, 1] = np.nan
        bad = RbmParams(p.visible_bias, p.hidden_bias, w, p.visible_spec, p.hidden_spec)
        problems = validate(bad)
        assert len(problems) == 1
        assert "(2, 1)" in problems[0]

    def test_conv_clean(self):
        assert validate_conv(init_conv_params(1, 4, seed=2)) == []

    def test_conv_nonsquare_kernel(self):
        p = init_conv_params(1, 4)
        bad = ConvRbmParams(
            filters=np.zeros((4, 1, 3, 5)),
            hidden_bias=p.hidden_bias,
            visible_bias=p.visible_bias,
            stride=p.stride,
            visible_spec=p.visible_spec,
            hidden_spec=p.hidden_spec,
        )
        assert any("square" in msg for msg in validate_conv(bad))

    def test_conv_bias_length(self):
        p = init_conv_params(2, 4)
        bad = ConvRbmParams(
            filters=p.filters,
            hidden_bias=np.zeros(5),
            visible_bias=p.visible_bias,
            stride=p.stride,
            visible_spec=p.visible_spec,
            hidden_spec=p.hidden_spec,
        )
        assert validate_conv(bad) != []


class TestValidateModel:
    def test_dense_chain_ok(self):
        model = DbnModel([init_params(9, 6, seed=0), init_params(6, 3, seed=1)])
        assert validate_model(model) == []
        assert validate_model(model, input_shape=(9,)) == []

    def test_dense_chain_width_mismatch(self):
        model = DbnModel([init_params(9, 6, seed=0), init_params(5, 3, seed=1)])
        problems = validate_model(model)
        assert any("layer 1" in msg for msg in problems)

    def test_input_shape_mismatch(self):
        model = DbnModel([init_params(9, 6, seed=0)])
        assert validate_model(model, input_shape=(8,)) != []

    def test_conv_then_dense_propagates_spatial_shape(self):
        conv = init_conv_params(1, 4, kernel_size=4, stride=2, input_size=(12, 12))
        # (12 - 4) / 2 + 1 = 5, so the flattened hidden map has 4 * 25 units.
        good = DbnModel([conv, init_params(100, 10, seed=1)])
        assert validate_model(good, input_shape=(1, 12, 12)) == []
        bad = DbnModel([conv, init_params(99, 10, seed=1)])
        assert validate_model(bad, input_shape=(1, 12, 12)) != []

    def test_bad_layer_type_reported(self):
        model = DbnModel([init_params(4, 2), "not a layer"])
        assert validate_model(model) != []
