"""Seeded random streams and block Gibbs sampling.

Sampling a multinary unit means sampling its N weight-sharing binary
copies and adding them up.  That is exact but costs one uniform draw per
copy; the Gaussian moment-matched shortcut is available behind
method="gaussian" for large N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import ActivationSpec, f_mean, f_variance, offsets, sigmoid
from .params import RbmParams
from .validation import as_batch, as_generator


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Using (seed, stream_id) as the generator seed sequence keeps streams
    for different purposes (weight init, Gibbs noise, generation)
    independent while everything remains a function of the one run seed.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng((self.seed, self.stream_id))

    def split(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def hidden_mean(params: RbmParams, v: np.ndarray) -> np.ndarray:
    """Smooth mean activation of the hidden layer, f(b + v W)."""
    v2, single = as_batch(v, params.n_visible, "v")
    m = f_mean(params.hidden_spec, params.hidden_bias + v2 @ params.weights)
    return m[0] if single else m


def visible_mean(params: RbmParams, h: np.ndarray) -> np.ndarray:
    """Smooth mean activation of the visible layer, f(a + h W^T)."""
    h2, single = as_batch(h, params.n_hidden, "h")
    m = f_mean(params.visible_spec, params.visible_bias + h2 @ params.weights.T)
    return m[0] if single else m


def sample_levels(
    spec: ActivationSpec,
    pre: np.ndarray,
    rng,
    method: str = "copies",
) -> np.ndarray:
    """Sample unit values in {0..N} from pre-activations.

    method="copies" draws each of the N binary copies exactly: copy n
    fires with probability sigmoid(pre - o_n).  method="gaussian" is a
    cheaper approximation, a rounded and clipped normal draw whose mean
    and variance come from the smooth transfer curve f; it is close to
    but not identical to the copy distribution and is never used by the
    correctness oracles.
    """
    gen = as_generator(rng)
    pre = np.asarray(pre, dtype=np.float64)
    if method == "copies":
        out = np.zeros(pre.shape)
        for o in offsets(spec):
            out += gen.random(pre.shape) < sigmoid(pre - o)
        return out
    if method == "gaussian":
        draw = f_mean(spec, pre) + gen.standard_normal(pre.shape) * np.sqrt(
            f_variance(spec, pre)
        )
        return np.clip(np.rint(draw), 0.0, float(spec.n_levels))
    raise ValueError(f"unknown sampling method {method!r}")


def sample_hidden(
    params: RbmParams, v: np.ndarray, rng, method: str = "copies"
) -> np.ndarray:
    v2, single = as_batch(v, params.n_visible, "v")
    h = sample_levels(
        params.hidden_spec, params.hidden_bias + v2 @ params.weights, rng, method
    )
    return h[0] if single else h


def sample_visible(
    params: RbmParams, h: np.ndarray, rng, method: str = "copies"
) -> np.ndarray:
    h2, single = as_batch(h, params.n_hidden, "h")
    v = sample_levels(
        params.visible_spec,
        params.visible_bias + h2 @ params.weights.T,
        rng,
        method,
    )
    return v[0] if single else v


def gibbs_chain(
    params: RbmParams,
    v: np.ndarray,
    steps: int = 1,
    rng=None,
    mode: str = "stochastic",
    method: str = "copies",
) -> np.ndarray:
    """Run block Gibbs updates from v and return the final visible state.

    mode="stochastic" alternates exact hidden and visible draws;
    mode="mean_field" propagates smooth means instead and needs no rng.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if mode not in ("stochastic", "mean_field"):
        raise ValueError(f"unknown chain mode {mode!r}")
    v2, single = as_batch(v, params.n_visible, "v")
    gen = as_generator(rng) if mode == "stochastic" else None
    cur = v2
    for _ in range(steps):
        if mode == "mean_field":
            cur = visible_mean(params, hidden_mean(params, cur))
        else:
            h = sample_hidden(params, cur, gen, method=method)
            cur = sample_visible(params, h, gen, method=method)
    return cur[0] if single else cur
