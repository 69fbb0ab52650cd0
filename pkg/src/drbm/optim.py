"""Adam optimizer over layer parameters.

State is immutable: each step returns a fresh (state, params) pair, so a
training loop can be replayed or checkpointed at any step boundary.  The
three parameter arrays of a layer (visible bias, hidden bias, weight or
filter tensor) are updated jointly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .params import ConvRbmParams, GradientSet, RbmParams


class NumericalError(RuntimeError):
    """Raised when a gradient or update stops being finite."""


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.03
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.learning_rate < 0.0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class AdamState:
    """Running moment estimates, one slot per parameter array."""

    first_moment: GradientSet
    second_moment: GradientSet
    step_count: int
    config: AdamConfig


def _layer_arrays(params):
    """The (visible_bias, hidden_bias, main tensor) triple of a layer."""
    if isinstance(params, RbmParams):
        return params.visible_bias, params.hidden_bias, params.weights
    if isinstance(params, ConvRbmParams):
        return params.visible_bias, params.hidden_bias, params.filters
    raise TypeError(f"not an RBM layer: {type(params).__name__}")


def _rebuild_layer(params, arrays):
    a, b, w = arrays
    if isinstance(params, RbmParams):
        return replace(params, visible_bias=a, hidden_bias=b, weights=w)
    return replace(params, visible_bias=a, hidden_bias=b, filters=w)


def init_adam(params, config: AdamConfig | None = None) -> AdamState:
    """Zeroed moments shaped like the given layer."""
    if config is None:
        config = AdamConfig()
    zeros = GradientSet(*(np.zeros_like(arr) for arr in _layer_arrays(params)))
    return AdamState(
        first_moment=zeros,
        second_moment=GradientSet(
            *(np.zeros_like(arr) for arr in _layer_arrays(params))
        ),
        step_count=0,
        config=config,
    )


def adam_step(state: AdamState, params, grads: GradientSet):
    """One bias-corrected Adam descent step.

    Returns (new_state, new_params); the inputs are untouched.  grads
    must be the gradient of the quantity being minimized.  Raises
    NumericalError if any gradient entry is not finite.
    """
    g = (grads.d_visible_bias, grads.d_hidden_bias, grads.d_weights)
    names = ("d_visible_bias", "d_hidden_bias", "d_weights")
    for name, arr in zip(names, g):
        if not np.all(np.isfinite(arr)):
            raise NumericalError(f"non-finite gradient in {name}")

    cfg = state.config
    t = state.step_count + 1
    m_old = (
        state.first_moment.d_visible_bias,
        state.first_moment.d_hidden_bias,
        state.first_moment.d_weights,
    )
    v_old = (
        state.second_moment.d_visible_bias,
        state.second_moment.d_hidden_bias,
        state.second_moment.d_weights,
    )
    m_new = [cfg.beta1 * m + (1.0 - cfg.beta1) * gi for m, gi in zip(m_old, g)]
    v_new = [cfg.beta2 * v + (1.0 - cfg.beta2) * gi * gi for v, gi in zip(v_old, g)]
    m_hat_scale = 1.0 / (1.0 - cfg.beta1**t)
    v_hat_scale = 1.0 / (1.0 - cfg.beta2**t)

    updated = []
    for arr, m, v in zip(_layer_arrays(params), m_new, v_new):
        step = cfg.learning_rate * (m * m_hat_scale) / (
            np.sqrt(v * v_hat_scale) + cfg.epsilon
        )
        updated.append(arr - step)

    new_state = AdamState(
        first_moment=GradientSet(*m_new),
        second_moment=GradientSet(*v_new),
        step_count=t,
        config=cfg,
    )
    return new_state, _rebuild_layer(params, updated)
