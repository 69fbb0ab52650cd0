"""Built-in correctness checks.

Each check is a small, seeded experiment that compares two independent
routes to the same quantity: analytic gradients against finite
differences, multinary free energies against an expanded all-binary
model, the streamed partition function against joint brute force, and
so on.  `run_checks` runs them all and reports one result per check.

The gradient checks accept an injected gradient function so a deliberate
mutation can demonstrate that the battery actually bites.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .activations import (
    ActivationSpec,
    f_integral,
    f_mean,
    offsets,
    sigmoid,
    softplus,
    sum_sigmoid_mean,
    sum_sigmoid_var,
)
from .conv import conv_contrastive_loss, conv_hidden_pre, conv_loss_gradient
from .exact import (
    energy,
    enumerate_binary_states,
    free_energy,
    log_likelihood_exact,
    log_partition_exact,
    exact_loglik_gradient,
)
from .io import ChecksumError, load_model, save_model
from .loss import cd1_reference, contrastive_loss, loss_gradient, reconstruct
from .optim import adam_step, init_adam
from .params import (
    ConvRbmParams,
    DbnModel,
    GradientSet,
    RbmParams,
    init_conv_params,
    validate,
)
from .sampling import sample_levels


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def expand_to_binary(params: RbmParams) -> RbmParams:
    """Rewrite an N-level hidden layer as H*N plain binary units.

    Copy n of hidden unit j gets bias b_j - o_n and unit j's weight
    column; the two models have identical free energies and therefore an
    identical visible distribution.
    """
    offs = offsets(params.hidden_spec)
    n = params.hidden_spec.n_levels
    bias = (params.hidden_bias[:, None] - offs[None, :]).reshape(-1)
    return RbmParams(
        visible_bias=params.visible_bias.copy(),
        hidden_bias=bias,
        weights=np.repeat(params.weights, n, axis=1),
        visible_spec=params.visible_spec,
        hidden_spec=ActivationSpec(1, 1.0),
    )


def _random_params(seed: int, n_visible=4, n_hidden=3, n_levels=3) -> RbmParams:
    rng = np.random.default_rng(seed)
    return RbmParams(
        visible_bias=rng.normal(0.0, 0.5, n_visible),
        hidden_bias=rng.normal(0.0, 0.5, n_hidden),
        weights=rng.normal(0.0, 0.5, (n_visible, n_hidden)),
        visible_spec=ActivationSpec(1, 1.0),
        hidden_spec=ActivationSpec(n_levels, 1.0),
    )


def _fd_array(fn, arr: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of fn() with respect to arr, in place."""
    grad = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + eps
        hi = fn()
        arr[idx] = orig - eps
        lo = fn()
        arr[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * eps)
    return grad


def _fd_gradient_set(fn, params: RbmParams) -> GradientSet:
    return GradientSet(
        _fd_array(fn, params.visible_bias),
        _fd_array(fn, params.hidden_bias),
        _fd_array(fn, params.weights),
    )


def _grad_close(a: GradientSet, b: GradientSet, tol: float) -> float:
    """Worst mixed absolute/relative deviation between two gradient sets."""
    worst = 0.0
    for x, y in (
        (a.d_visible_bias, b.d_visible_bias),
        (a.d_hidden_bias, b.d_hidden_bias),
        (a.d_weights, b.d_weights),
    ):
        denom = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
        worst = max(worst, float((np.abs(x - y) / denom).max()))
    return worst / tol


def _check_activation_identities() -> CheckResult:
    x = np.linspace(-30.0, 30.0, 121)
    err = float(np.abs(sigmoid(-x) - (1.0 - sigmoid(x))).max())
    err = max(err, float(np.abs(softplus(x) - softplus(-x) - x).max()))
    spec = ActivationSpec(5, 2.0)
    err = max(err, abs(float(f_integral(spec, 0.0)) - 2.5 * np.log(2.0)))
    return CheckResult(
        "activation-identities", err < 1e-12, f"max identity error {err:.3g}"
    )


def _check_offset_crossings() -> CheckResult:
    worst = 0.0
    for spec in (ActivationSpec(1, 1.0), ActivationSpec(4, 1.0), ActivationSpec(255, 1.0)):
        at_offsets = f_mean(spec, offsets(spec))
        target = np.arange(1, spec.n_levels + 1) - 0.5
        worst = max(worst, float(np.abs(at_offsets - target).max()))
    return CheckResult(
        "offset-crossings", worst < 1e-9, f"max crossing error {worst:.3g}"
    )


def _check_integral_derivative() -> CheckResult:
    spec = ActivationSpec(7, 1.5)
    x = np.linspace(-4.0, 4.0, 17)
    eps = 1e-6
    fd = (f_integral(spec, x + eps) - f_integral(spec, x - eps)) / (2 * eps)
    err = float(np.abs(fd - f_mean(spec, x)).max())
    return CheckResult(
        "integral-derivative", err < 1e-5, f"max d/dx mismatch {err:.3g}"
    )


def _check_copy_expansion() -> CheckResult:
    params = _random_params(11, n_visible=5, n_hidden=3, n_levels=4)
    v = enumerate_binary_states(params.n_visible)
    err = float(np.abs(free_energy(params, v) - free_energy(expand_to_binary(params), v)).max())
    return CheckResult(
        "copy-expansion", err < 1e-9, f"max free-energy mismatch {err:.3g}"
    )


def _check_partition_brute_force() -> CheckResult:
    params = _random_params(12, n_visible=3, n_hidden=2, n_levels=2)
    binary = expand_to_binary(params)
    v_all = enumerate_binary_states(binary.n_visible)
    h_all = enumerate_binary_states(binary.n_hidden)
    energies = np.array(
        [energy(binary, np.tile(v, (h_all.shape[0], 1)), h_all) for v in v_all]
    ).ravel()
    m = energies.min()
    brute = m * -1.0 + np.log(np.exp(-(energies - m)).sum())
    err = abs(log_partition_exact(params) - brute)
    return CheckResult(
        "partition-brute-force", err < 1e-9, f"log Z mismatch {err:.3g}"
    )


def _check_loss_gradient_fd(grad_fn) -> CheckResult:
    params = _random_params(13)
    rng = np.random.default_rng(14)
    v = rng.integers(0, 2, size=(6, params.n_visible)).astype(np.float64)
    v_prime = reconstruct(params, v)
    analytic = grad_fn(params, v, v_prime)
    fd = _fd_gradient_set(lambda: contrastive_loss(params, v, v_prime), params)
    ratio = _grad_close(analytic, fd, 1e-5)
    return CheckResult(
        "loss-gradient-fd", ratio < 1.0, f"worst deviation {ratio:.3g}x tolerance"
    )


def _check_cd1_negation(grad_fn) -> CheckResult:
    params = _random_params(15)
    rng = np.random.default_rng(16)
    v = rng.integers(0, 2, size=(5, params.n_visible)).astype(np.float64)
    v_prime = reconstruct(params, v)
    neg = grad_fn(params, v, v_prime)
    cd1 = cd1_reference(params, v, v_prime=v_prime)
    err = max(
        float(np.abs(cd1.d_visible_bias + neg.d_visible_bias).max()),
        float(np.abs(cd1.d_hidden_bias + neg.d_hidden_bias).max()),
        float(np.abs(cd1.d_weights + neg.d_weights).max()),
    )
    return CheckResult(
        "cd1-negation", err == 0.0, f"max |cd1 + loss grad| = {err:.3g}"
    )


def _check_exact_gradient_fd() -> CheckResult:
    params = _random_params(17, n_visible=4, n_hidden=2, n_levels=3)
    rng = np.random.default_rng(18)
    data = rng.integers(0, 2, size=(5, params.n_visible)).astype(np.float64)
    analytic = exact_loglik_gradient(params, data)
    fd = _fd_gradient_set(
        lambda: log_likelihood_exact(params, data).mean_log_likelihood, params
    )
    ratio = _grad_close(analytic, fd, 1e-5)
    return CheckResult(
        "exact-gradient-fd", ratio < 1.0, f"worst deviation {ratio:.3g}x tolerance"
    )


def _check_conv_gradient_fd() -> CheckResult:
    params = init_conv_params(
        1, 2, kernel_size=3, stride=2, hidden_spec=ActivationSpec(3, 1.0), seed=19
    )
    rng = np.random.default_rng(20)
    params = ConvRbmParams(
        filters=rng.normal(0.0, 0.3, params.filters.shape),
        hidden_bias=rng.normal(0.0, 0.3, 2),
        visible_bias=rng.normal(0.0, 0.3, 1),
        stride=2,
        visible_spec=params.visible_spec,
        hidden_spec=params.hidden_spec,
    )
    v = rng.integers(0, 2, size=(3, 1, 6, 6)).astype(np.float64)
    recon = rng.random((3, 1, 6, 6))
    analytic = conv_loss_gradient(params, v, recon)
    fd = GradientSet(
        _fd_array(lambda: conv_contrastive_loss(params, v, recon), params.visible_bias),
        _fd_array(lambda: conv_contrastive_loss(params, v, recon), params.hidden_bias),
        _fd_array(lambda: conv_contrastive_loss(params, v, recon), params.filters),
    )
    ratio = _grad_close(analytic, fd, 1e-5)
    return CheckResult(
        "conv-gradient-fd", ratio < 1.0, f"worst deviation {ratio:.3g}x tolerance"
    )


def _check_conv_dense_equivalence() -> CheckResult:
    dense = _random_params(21, n_visible=4, n_hidden=3, n_levels=2)
    conv = ConvRbmParams(
        filters=dense.weights.T[:, :, None, None].copy(),
        hidden_bias=dense.hidden_bias.copy(),
        visible_bias=dense.visible_bias.copy(),
        stride=1,
        visible_spec=dense.visible_spec,
        hidden_spec=dense.hidden_spec,
        input_size=(1, 1),
    )
    rng = np.random.default_rng(22)
    flat = rng.integers(0, 2, size=(6, 4)).astype(np.float64)
    imgs = flat[:, :, None, None]
    pre_err = float(
        np.abs(
            conv_hidden_pre(conv, imgs)[:, :, 0, 0]
            - (dense.hidden_bias + flat @ dense.weights)
        ).max()
    )
    flat_recon = reconstruct(dense, flat)
    loss_err = abs(
        conv_contrastive_loss(conv, imgs, flat_recon[:, :, None, None])
        - contrastive_loss(dense, flat, flat_recon)
    )
    err = max(pre_err, loss_err)
    return CheckResult(
        "conv-dense-equivalence", err < 1e-10, f"max 1x1 conv mismatch {err:.3g}"
    )


def _check_adam_descent() -> CheckResult:
    layer = RbmParams(np.ones(3), np.ones(2), np.ones((3, 2)))
    state = init_adam(layer)
    first_step = None
    for _ in range(500):
        grads = GradientSet(
            layer.visible_bias.copy(), layer.hidden_bias.copy(), layer.weights.copy()
        )
        state, layer = adam_step(state, layer, grads)
        if first_step is None:
            first_step = abs(1.0 - float(layer.visible_bias[0]))
    end = max(
        float(np.abs(a).max())
        for a in (layer.visible_bias, layer.hidden_bias, layer.weights)
    )
    ok = end < 1e-3 and abs(first_step - state.config.learning_rate) < 1e-6
    return CheckResult(
        "adam-descent",
        ok,
        f"|x| after 500 quadratic steps {end:.3g}, first step {first_step:.4g}",
    )


def _check_sampler_moments() -> CheckResult:
    spec = ActivationSpec(3, 1.0)
    rng = np.random.default_rng(23)
    pre = rng.uniform(-2.0, 2.0, 8)
    draws = sample_levels(spec, np.tile(pre, (4000, 1)), np.random.default_rng(24))
    want = sum_sigmoid_mean(spec, pre)
    se = np.sqrt(sum_sigmoid_var(spec, pre) / 4000.0)
    z = float((np.abs(draws.mean(axis=0) - want) / se).max())
    return CheckResult("sampler-moments", z < 5.0, f"max z-score {z:.2f}")


def _check_container_round_trip() -> CheckResult:
    model = DbnModel([_random_params(25), init_conv_params(1, 2, 3, 2, seed=26, input_size=(6, 6))])
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "model.drbm"
        save_model(path, model)
        loaded = load_model(path)
        same = (
            np.array_equal(loaded.layers[0].weights, model.layers[0].weights)
            and np.array_equal(loaded.layers[1].filters, model.layers[1].filters)
            and loaded.layers[0].hidden_spec == model.layers[0].hidden_spec
            and loaded.layers[1].input_size == (6, 6)
        )
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        try:
            load_model(path)
            caught = False
        except ChecksumError:
            caught = True
    ok = same and caught
    return CheckResult(
        "container-round-trip",
        ok,
        f"round trip exact: {same}, corruption detected: {caught}",
    )


def _check_validation_bites() -> CheckResult:
    params = _random_params(27)
    params.weights[1, 2] = np.nan
    report = validate(params)
    ok = len(report) == 1 and "weights" in report[0]
    return CheckResult(
        "validation-bites", ok, f"{len(report)} violation(s) reported"
    )


def run_checks(grad_fn=None) -> list[CheckResult]:
    """Run the whole battery; grad_fn substitutes for the analytic loss
    gradient in the two checks that exercise it."""
    if grad_fn is None:
        grad_fn = loss_gradient
    return [
        _check_activation_identities(),
        _check_offset_crossings(),
        _check_integral_derivative(),
        _check_copy_expansion(),
        _check_partition_brute_force(),
        _check_loss_gradient_fd(grad_fn),
        _check_cd1_negation(grad_fn),
        _check_exact_gradient_fd(),
        _check_conv_gradient_fd(),
        _check_conv_dense_equivalence(),
        _check_adam_descent(),
        _check_sampler_moments(),
        _check_container_round_trip(),
        _check_validation_bites(),
    ]
