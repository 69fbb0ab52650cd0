import numpy as np
import pytest

from drbm import (
    ActivationSpec,
    RbmParams,
    RngStream,
    cd1_reference,
    contrastive_loss,
    exact_loglik_gradient,
    hidden_mean,
    log_likelihood_exact,
    loss_and_grad,
    loss_gradient,
    reconstruct,
    visible_mean,
)

from helpers import binary_batch, fd_gradient_set, max_rel_err, random_rbm


class TestReconstruct:
    def test_mean_field_composition(self):
        p = random_rbm(0, n_visible=5, n_hidden=3, n_levels=4)
        v = binary_batch(1, 6, 5)
        want = visible_mean(p, hidden_mean(p, v))
        np.testing.assert_allclose(reconstruct(p, v), want, rtol=1e-14)

    def test_stochastic_reproducible(self):
        p = random_rbm(0, n_visible=5, n_hidden=3)
        v = binary_batch(1, 6, 5)
        a = reconstruct(p, v, RngStream(2, 0).generator(), mode="stochastic")
        b = reconstruct(p, v, RngStream(2, 0).generator(), mode="stochastic")
        np.testing.assert_array_equal(a, b)

    def test_stochastic_output_is_visible_mean(self):
        # hidden noise, but the downward pass stays continuous
        p = random_rbm(0, n_visible=5, n_hidden=3)
        v = binary_batch(1, 200, 5)
        out = reconstruct(p, v, RngStream(2, 0).generator(), mode="stochastic")
        assert np.all((out > 0.0) & (out < 1.0))

    def test_unknown_mode(self):
        p = random_rbm(0)
        with pytest.raises(ValueError):
            reconstruct(p, binary_batch(1, 2, 4), mode="cd10")


class TestLossValue:
    def test_zero_when_reconstruction_equals_data(self):
        p = random_rbm(4, n_visible=5, n_hidden=3, n_levels=16)
        v = binary_batch(5, 7, 5)
        assert contrastive_loss(p, v, v.copy()) == 0.0

    def test_shape_mismatch(self):
        p = random_rbm(4, n_visible=5, n_hidden=3)
        with pytest.raises(ValueError):
            contrastive_loss(p, binary_batch(0, 4, 5), binary_batch(0, 3, 5))

    def test_batch_additivity(self):
        p = random_rbm(4, n_visible=5, n_hidden=3, n_levels=4)
        v = binary_batch(5, 6, 5)
        vp = reconstruct(p, v)
        total = contrastive_loss(p, v, vp)
        parts = sum(
            contrastive_loss(p, v[i : i + 1], vp[i : i + 1]) for i in range(6)
        )
        assert total == pytest.approx(parts, rel=1e-12)


class TestHandComputedCase:
    def test_single_unit_pair(self):
        sig = lambda t: 1.0 / (1.0 + np.exp(-t))
        a, b, w = 0.2, -0.1, 0.5
        p = RbmParams(
            visible_bias=np.array([a]),
            hidden_bias=np.array([b]),
            weights=np.array([[w]]),
            visible_spec=ActivationSpec(),
            hidden_spec=ActivationSpec(),
        )
        v = 1.0
        h = sig(b + v * w)
        v_p = sig(a + h * w)
        np.testing.assert_allclose(reconstruct(p, np.array([v])), [v_p], rtol=1e-14)

        f = lambda t: -a * t - np.log1p(np.exp(b + t * w))
        want_loss = f(v) - f(v_p)
        got_loss = contrastive_loss(p, np.array([[v]]), np.array([[v_p]]))
        assert got_loss == pytest.approx(want_loss, rel=1e-13)

        g = loss_gradient(p, np.array([[v]]), np.array([[v_p]]))
        h_p = sig(b + v_p * w)
        assert g.d_visible_bias[0] == pytest.approx(v_p - v, rel=1e-13)
        assert g.d_hidden_bias[0] == pytest.approx(h_p - h, rel=1e-13)
        assert g.d_weights[0, 0] == pytest.approx(v_p * h_p - v * h, rel=1e-13)


class TestLossGradient:
    @pytest.mark.parametrize("n_levels,k", [(1, 1.0), (4, 1.0), (16, 0.5), (255, 1.0)])
    def test_finite_differences(self, n_levels, k):
        p = random_rbm(6, n_visible=5, n_hidden=4, n_levels=n_levels, k=k)
        v = binary_batch(7, 6, 5)
        v_prime = reconstruct(p, v)

        def objective():
            return contrastive_loss(p, v, v_prime)

        fd = fd_gradient_set(objective, p, eps=1e-5)
        an = loss_gradient(p, v, v_prime)
        assert max_rel_err(an, fd) < 1e-7

    def test_zero_gradient_when_v_prime_equals_v(self):
        p = random_rbm(6, n_visible=5, n_hidden=4, n_levels=4)
        v = binary_batch(7, 6, 5)
        g = loss_gradient(p, v, v.copy())
        assert np.all(g.d_visible_bias == 0.0)
        assert np.all(g.d_hidden_bias == 0.0)
        assert np.all(g.d_weights == 0.0)

    def test_zero_weight_symmetric_data_gives_zero_gradient(self):
        p = RbmParams(
            visible_bias=np.zeros(4),
            hidden_bias=np.zeros(3),
            weights=np.zeros((4, 3)),
            visible_spec=ActivationSpec(),
            hidden_spec=ActivationSpec(),
        )
        patterns = binary_batch(8, 5, 4)
        data = np.vstack([patterns, 1.0 - patterns])
        g = loss_gradient(p, data, reconstruct(p, data))
        assert np.abs(g.d_visible_bias).max() < 1e-12
        assert np.abs(g.d_hidden_bias).max() < 1e-12
        assert np.abs(g.d_weights).max() < 1e-12


class TestCd1Reference:
    def test_exact_negation_bitwise(self):
        for seed in range(5):
            p = random_rbm(seed, n_visible=6, n_hidden=4, n_levels=4)
            v = binary_batch(seed + 50, 8, 6)
            vp = reconstruct(p, v)
            g = loss_gradient(p, v, vp)
            cd = cd1_reference(p, v, v_prime=vp)
            np.testing.assert_array_equal(cd.d_visible_bias, -g.d_visible_bias)
            np.testing.assert_array_equal(cd.d_hidden_bias, -g.d_hidden_bias)
            np.testing.assert_array_equal(cd.d_weights, -g.d_weights)

    def test_draws_own_reconstruction_when_not_given(self):
        p = random_rbm(3, n_visible=6, n_hidden=4)
        v = binary_batch(9, 8, 6)
        own = cd1_reference(p, v)
        explicit = cd1_reference(p, v, v_prime=reconstruct(p, v))
        np.testing.assert_array_equal(own.d_weights, explicit.d_weights)


class TestDescentDirection:
    def test_small_step_rarely_hurts_likelihood(self):
        # A tiny move against the loss gradient should not reduce the
        # exact log-likelihood in the vast majority of random problems.
        rng = np.random.default_rng(123)
        step = 1e-4
        improved = 0
        trials = 100
        for t in range(trials):
            p = random_rbm(
                1000 + t,
                n_visible=int(rng.integers(3, 8)),
                n_hidden=int(rng.integers(2, 5)),
                weight_scale=0.8,
            )
            data = binary_batch(2000 + t, 12, p.n_visible)
            before = log_likelihood_exact(p, data).mean_log_likelihood
            g = loss_gradient(p, data, reconstruct(p, data))
            moved = RbmParams(
                p.visible_bias - step * g.d_visible_bias,
                p.hidden_bias - step * g.d_hidden_bias,
                p.weights - step * g.d_weights,
                p.visible_spec,
                p.hidden_spec,
            )
            after = log_likelihood_exact(moved, data).mean_log_likelihood
            if after >= before - 1e-12:
                improved += 1
        assert improved >= 95, f"loglik improved in only {improved}/{trials} trials"

    def test_cd1_roughly_tracks_exact_gradient(self):
        # directional agreement: positive cosine with the true ascent
        # direction for moderate models
        agree = 0
        for t in range(20):
            p = random_rbm(400 + t, n_visible=6, n_hidden=3, weight_scale=0.6)
            data = binary_batch(500 + t, 10, 6)
            cd = cd1_reference(p, data)
            ex = exact_loglik_gradient(p, data)
            dot = (
                (cd.d_visible_bias * ex.d_visible_bias).sum()
                + (cd.d_hidden_bias * ex.d_hidden_bias).sum()
                + (cd.d_weights * ex.d_weights).sum()
            )
            if dot > 0:
                agree += 1
        assert agree >= 18


class TestLossAndGrad:
    def test_consistent_bundle(self):
        p = random_rbm(10, n_visible=5, n_hidden=3, n_levels=4)
        v = binary_batch(11, 6, 5)
        res = loss_and_grad(p, v)
        np.testing.assert_array_equal(res.reconstructions, reconstruct(p, v))
        assert res.loss == contrastive_loss(p, v, res.reconstructions)
        g = loss_gradient(p, v, res.reconstructions)
        np.testing.assert_array_equal(res.gradients.d_weights, g.d_weights)

    def test_stochastic_bundle_uses_one_draw(self):
        p = random_rbm(10, n_visible=5, n_hidden=3)
        v = binary_batch(11, 6, 5)
        res = loss_and_grad(p, v, RngStream(3, 0).generator(), mode="stochastic")
        want = reconstruct(p, v, RngStream(3, 0).generator(), mode="stochastic")
        np.testing.assert_array_equal(res.reconstructions, want)
