import numpy as np
import pytest

from drbm import (
    ActivationSpec,
    AdamConfig,
    AdamState,
    GradientSet,
    NumericalError,
    RbmParams,
    adam_step,
    init_adam,
    init_conv_params,
)

from helpers import random_rbm


def constant_grad(params, value):
    return GradientSet(
        np.full_like(params.visible_bias, value),
        np.full_like(params.hidden_bias, value),
        np.full_like(params.weights, value),
    )


class TestConfig:
    def test_defaults(self):
        cfg = AdamConfig()
        assert cfg.learning_rate == 0.03
        assert cfg.beta1 == 0.9
        assert cfg.beta2 == 0.999
        assert cfg.epsilon == 1e-8

    def test_zero_learning_rate_is_legal(self):
        AdamConfig(learning_rate=0.0)

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            AdamConfig(learning_rate=-0.1)

    def test_rejects_bad_betas(self):
        with pytest.raises(ValueError):
            AdamConfig(beta1=1.0)
        with pytest.raises(ValueError):
            AdamConfig(beta2=-0.2)

    def test_rejects_bad_epsilon(self):
        with pytest.raises(ValueError):
            AdamConfig(epsilon=0.0)


class TestInit:
    def test_zero_state(self):
        p = random_rbm(0, n_visible=4, n_hidden=3)
        st = init_adam(p)
        assert st.step_count == 0
        assert np.all(st.first_moment.d_weights == 0.0)
        assert np.all(st.second_moment.d_weights == 0.0)
        assert st.first_moment.d_visible_bias.shape == (4,)

    def test_conv_state_uses_filter_shape(self):
        p = init_conv_params(2, 5, kernel_size=3)
        st = init_adam(p)
        assert st.first_moment.d_weights.shape == (5, 2, 3, 3)


class TestStep:
    def test_first_step_magnitude_is_learning_rate(self):
        # With bias correction the first update is lr * g / (|g| + eps'),
        # so every coordinate moves by almost exactly lr.
        p = random_rbm(1, n_visible=4, n_hidden=3)
        st = init_adam(p, AdamConfig(learning_rate=0.05))
        _, moved = adam_step(st, p, constant_grad(p, 2.5))
        delta = p.weights - moved.weights
        np.testing.assert_allclose(delta, 0.05, rtol=1e-6)

    def test_sign_convention_descends(self):
        p = random_rbm(1, n_visible=4, n_hidden=3)
        st = init_adam(p)
        _, moved = adam_step(st, p, constant_grad(p, 1.0))
        assert np.all(moved.weights < p.weights)
        _, moved_up = adam_step(st, p, constant_grad(p, -1.0))
        assert np.all(moved_up.weights > p.weights)

    def test_zero_learning_rate_keeps_params(self):
        p = random_rbm(2, n_visible=4, n_hidden=3)
        st = init_adam(p, AdamConfig(learning_rate=0.0))
        st2, moved = adam_step(st, p, constant_grad(p, 3.0))
        np.testing.assert_array_equal(moved.weights, p.weights)
        np.testing.assert_array_equal(moved.visible_bias, p.visible_bias)
        assert st2.step_count == 1

    def test_zero_gradient_keeps_params(self):
        p = random_rbm(2, n_visible=4, n_hidden=3)
        st = init_adam(p)
        _, moved = adam_step(st, p, constant_grad(p, 0.0))
        np.testing.assert_array_equal(moved.weights, p.weights)

    def test_inputs_untouched(self):
        p = random_rbm(3, n_visible=4, n_hidden=3)
        before = p.weights.copy()
        st = init_adam(p)
        m_before = st.first_moment.d_weights.copy()
        adam_step(st, p, constant_grad(p, 1.0))
        np.testing.assert_array_equal(p.weights, before)
        np.testing.assert_array_equal(st.first_moment.d_weights, m_before)

    def test_non_finite_gradient_raises(self):
        p = random_rbm(3, n_visible=4, n_hidden=3)
        st = init_adam(p)
        bad = constant_grad(p, 1.0)
        bad.d_weights[0, 0] = np.nan
        with pytest.raises(NumericalError):
            adam_step(st, p, bad)
        bad.d_weights[0, 0] = np.inf
        with pytest.raises(NumericalError):
            adam_step(st, p, bad)

    def test_deterministic(self):
        p = random_rbm(4, n_visible=4, n_hidden=3)
        g = constant_grad(p, 0.7)
        a = adam_step(init_adam(p), p, g)[1]
        b = adam_step(init_adam(p), p, g)[1]
        np.testing.assert_array_equal(a.weights, b.weights)

    def test_conv_layer_step(self):
        p = init_conv_params(1, 3, kernel_size=3, seed=5)
        st = init_adam(p)
        g = GradientSet(
            np.ones_like(p.visible_bias),
            np.ones_like(p.hidden_bias),
            np.ones_like(p.filters),
        )
        st2, moved = adam_step(st, p, g)
        assert moved.filters.shape == p.filters.shape
        assert np.all(moved.filters < p.filters)
        assert st2.step_count == 1


class TestQuadraticConvergence:
    def test_settles_near_minimum(self):
        # Minimize x^2/2 from x = 1: after 500 steps at the default rate
        # the iterate sits well inside 1e-3 of the optimum.
        spec = ActivationSpec()
        p = RbmParams(
            visible_bias=np.array([1.0]),
            hidden_bias=np.zeros(1),
            weights=np.zeros((1, 1)),
            visible_spec=spec,
            hidden_spec=spec,
        )
        st = init_adam(p)
        for _ in range(500):
            g = GradientSet(p.visible_bias.copy(), np.zeros(1), np.zeros((1, 1)))
            st, p = adam_step(st, p, g)
        assert abs(p.visible_bias[0]) < 1e-3

    def test_monotone_moment_tracking(self):
        p = RbmParams(
            visible_bias=np.array([0.0]),
            hidden_bias=np.zeros(1),
            weights=np.zeros((1, 1)),
            visible_spec=ActivationSpec(),
            hidden_spec=ActivationSpec(),
        )
        st = init_adam(p)
        for _ in range(10):
            g = GradientSet(np.array([2.0]), np.zeros(1), np.zeros((1, 1)))
            st, p = adam_step(st, p, g)
        # first moment approaches the constant gradient from below
        m = st.first_moment.d_visible_bias[0]
        assert 0.0 < m < 2.0
        assert st.step_count == 10
