"""Contrastive free-energy loss and its analytic gradient.

The training objective for one batch is

    L = sum_b [ F(v_b) - F(v'_b) ]

where F is the integral-form free energy and v' is a one-step
reconstruction that is treated as a constant (no gradient flows through
it).  Minimizing L pushes free energy down on data and up on
reconstructions; its analytic gradient coincides with the negated CD-1
update built from the same reconstructions, and `cd1_reference` checks
exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import f_mean
from .exact import free_energy_integral
from .params import GradientSet, RbmParams
from .sampling import hidden_mean, sample_hidden, visible_mean
from .validation import as_batch, as_generator


def reconstruct(
    params: RbmParams, v: np.ndarray, rng=None, mode: str = "mean_field"
) -> np.ndarray:
    """One up-down pass: v -> hidden -> v'.

    mode="mean_field" propagates smooth means both ways and is fully
    deterministic.  mode="stochastic" samples the hidden copies exactly
    and then takes the visible mean, which keeps v' continuous while
    injecting hidden-layer noise.
    """
    v2, single = as_batch(v, params.n_visible, "v")
    if mode == "mean_field":
        h = hidden_mean(params, v2)
    elif mode == "stochastic":
        h = sample_hidden(params, v2, as_generator(rng))
    else:
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    out = visible_mean(params, h)
    return out[0] if single else out


def contrastive_loss(
    params: RbmParams, v: np.ndarray, v_prime: np.ndarray
) -> float:
    """Batch-summed loss F(v) - F(v') in the integral form."""
    v2, _ = as_batch(v, params.n_visible, "v")
    p2, _ = as_batch(v_prime, params.n_visible, "v_prime")
    if v2.shape != p2.shape:
        raise ValueError(
            f"v has shape {v2.shape} but v_prime has shape {p2.shape}"
        )
    return float(
        free_energy_integral(params, v2).sum()
        - free_energy_integral(params, p2).sum()
    )


def _moment_diff(params: RbmParams, v: np.ndarray, v_prime: np.ndarray):
    """Reconstruction-minus-data moments; the raw descent gradient."""
    hm = f_mean(params.hidden_spec, params.hidden_bias + v @ params.weights)
    hm_p = f_mean(
        params.hidden_spec, params.hidden_bias + v_prime @ params.weights
    )
    da = (v_prime - v).sum(axis=0)
    db = (hm_p - hm).sum(axis=0)
    dw = v_prime.T @ hm_p - v.T @ hm
    return da, db, dw


def loss_gradient(
    params: RbmParams, v: np.ndarray, v_prime: np.ndarray
) -> GradientSet:
    """Analytic gradient of `contrastive_loss` with v' held constant.

    dL/da = sum(v' - v), dL/db = sum(f(x') - f(x)),
    dL/dW = v'^T f(x') - v^T f(x).
    """
    v2, _ = as_batch(v, params.n_visible, "v")
    p2, _ = as_batch(v_prime, params.n_visible, "v_prime")
    if v2.shape != p2.shape:
        raise ValueError(
            f"v has shape {v2.shape} but v_prime has shape {p2.shape}"
        )
    da, db, dw = _moment_diff(params, v2, p2)
    return GradientSet(da, db, dw)


def cd1_reference(
    params: RbmParams,
    v: np.ndarray,
    rng=None,
    mode: str = "mean_field",
    v_prime: np.ndarray | None = None,
) -> GradientSet:
    """One-step contrastive divergence update, ascent convention.

    Data moments minus reconstruction moments, i.e. the exact negation
    of `loss_gradient` for the same v'.  Pass v_prime to share a
    reconstruction with the loss path; otherwise one is drawn here.
    """
    v2, _ = as_batch(v, params.n_visible, "v")
    if v_prime is None:
        v_prime = reconstruct(params, v2, rng=rng, mode=mode)
    return -loss_gradient(params, v2, v_prime)


@dataclass(frozen=True)
class LossBatchResult:
    """Loss value, the reconstructions it used, and the gradient."""

    loss: float
    reconstructions: np.ndarray
    gradients: GradientSet


def loss_and_grad(
    params: RbmParams, v: np.ndarray, rng=None, mode: str = "mean_field"
) -> LossBatchResult:
    """Reconstruct once, then evaluate loss and gradient on that v'."""
    v2, _ = as_batch(v, params.n_visible, "v")
    v_prime = reconstruct(params, v2, rng=rng, mode=mode)
    return LossBatchResult(
        loss=contrastive_loss(params, v2, v_prime),
        reconstructions=v_prime,
        gradients=loss_gradient(params, v2, v_prime),
    )
