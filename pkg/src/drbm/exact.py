"""Exact-enumeration oracles for small models.

Everything here is deliberately slow and obviously correct: energies are
summed state by state, the partition function is a streamed log-sum-exp
over all 2^V visible configurations, and the exact likelihood gradient
is the textbook data-minus-model moment difference.  Training code is
tested against these functions, never the other way around.

Enumeration requires binary visible units and at most MAX_ENUM_VISIBLE
of them; free energies themselves are closed-form and work at any size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import f_integral, offsets, softplus, sum_sigmoid_mean
from .params import GradientSet, RbmParams
from .validation import as_batch

MAX_ENUM_VISIBLE = 20
ENUM_CHUNK = 8192


def enumerate_binary_states(n: int, indices: np.ndarray | None = None) -> np.ndarray:
    """Rows of binary states over n units.

    Without indices, all 2^n states in integer order; state i has bit j
    equal to (i >> j) & 1.  With indices, only those rows (used for
    chunked enumeration).
    """
    if indices is None:
        if n > MAX_ENUM_VISIBLE:
            raise ValueError(
                f"refusing to materialize 2^{n} states; max is {MAX_ENUM_VISIBLE} units"
            )
        indices = np.arange(1 << n, dtype=np.int64)
    bits = (indices[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return bits.astype(np.float64)


def energy(params: RbmParams, v: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Joint energy E(v, h) = -a.v - b.h - v.W.h, batched over rows."""
    v2, single = as_batch(v, params.n_visible, "v")
    h2, _ = as_batch(h, params.n_hidden, "h")
    if v2.shape[0] != h2.shape[0]:
        raise ValueError(
            f"v has {v2.shape[0]} rows but h has {h2.shape[0]}"
        )
    e = -(v2 @ params.visible_bias) - (h2 @ params.hidden_bias)
    e -= np.einsum("bi,ij,bj->b", v2, params.weights, h2)
    return e[0] if single else e


def free_energy(params: RbmParams, v: np.ndarray) -> np.ndarray:
    """Exact free energy with hidden units summed out.

    F(v) = -a.v - sum_j sum_n softplus(x_j - o_n) over the N offsets of
    the hidden spec, where x = b + v W.  For binary hidden units the
    inner sum is the single familiar softplus(x_j).
    """
    v2, single = as_batch(v, params.n_visible, "v")
    x = params.hidden_bias + v2 @ params.weights
    offs = offsets(params.hidden_spec)
    sp = softplus(x[..., None] - offs)
    f = -(v2 @ params.visible_bias) - sp.sum(axis=(1, 2))
    return f[0] if single else f


def free_energy_integral(params: RbmParams, v: np.ndarray) -> np.ndarray:
    """Integral-form free energy used by the training loss.

    Replaces the per-copy softplus sum with the antiderivative of the
    smooth activation: F(v) ~ -a.v - sum_j (N/k) softplus(k x_j).  Exact
    for binary hidden units with k = 1 (the single offset is zero), an
    approximation otherwise.
    """
    v2, single = as_batch(v, params.n_visible, "v")
    x = params.hidden_bias + v2 @ params.weights
    f = -(v2 @ params.visible_bias) - f_integral(params.hidden_spec, x).sum(axis=1)
    return f[0] if single else f


def _require_enumerable(params: RbmParams) -> None:
    if params.visible_spec.n_levels != 1:
        raise ValueError(
            "exact enumeration needs binary visible units, got "
            f"n_levels={params.visible_spec.n_levels}"
        )
    if params.n_visible > MAX_ENUM_VISIBLE:
        raise ValueError(
            f"exact enumeration over {params.n_visible} visible units would "
            f"need 2^{params.n_visible} states; max is {MAX_ENUM_VISIBLE}"
        )


def log_partition_exact(params: RbmParams, chunk: int = ENUM_CHUNK) -> float:
    """log Z by streamed log-sum-exp of -F(v) over every visible state.

    Chunked so that 2^20 states never materialize at once; the running
    maximum is rescaled as larger values appear.
    """
    _require_enumerable(params)
    n_states = 1 << params.n_visible
    best = -np.inf
    total = 0.0
    for start in range(0, n_states, chunk):
        idx = np.arange(start, min(start + chunk, n_states), dtype=np.int64)
        neg_f = -free_energy(params, enumerate_binary_states(params.n_visible, idx))
        m = float(neg_f.max())
        if m > best:
            total *= np.exp(best - m)
            best = m
        total += float(np.exp(neg_f - best).sum())
    return best + float(np.log(total))


@dataclass(frozen=True)
class ExactModelReport:
    """Exact evaluation of a model on a dataset."""

    log_partition: float
    mean_log_likelihood: float
    per_sample: np.ndarray


def log_likelihood_exact(
    params: RbmParams,
    dataset: np.ndarray,
    weights: np.ndarray | None = None,
) -> ExactModelReport:
    """Exact log p(v) per sample plus the (weighted) mean.

    log p(v) = -F(v) - log Z with Z enumerated exactly.  weights, when
    given, are relative sample weights; they are normalized to sum to 1
    before averaging.
    """
    v2, _ = as_batch(dataset, params.n_visible, "dataset")
    log_z = log_partition_exact(params)
    per_sample = -free_energy(params, v2) - log_z
    if weights is None:
        mean = float(per_sample.mean())
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (v2.shape[0],):
            raise ValueError(
                f"weights shape {w.shape} does not match {v2.shape[0]} samples"
            )
        mean = float(per_sample @ (w / w.sum()))
    return ExactModelReport(log_z, mean, per_sample)


def _moments(params: RbmParams, v: np.ndarray, w: np.ndarray):
    """Weighted first moments (E[v], E[h|v] means, E[v h] outer) for rows v."""
    x = params.hidden_bias + v @ params.weights
    hm = sum_sigmoid_mean(params.hidden_spec, x)
    return w @ v, w @ hm, (v * w[:, None]).T @ hm


def exact_loglik_gradient(
    params: RbmParams,
    dataset: np.ndarray,
    weights: np.ndarray | None = None,
    chunk: int = ENUM_CHUNK,
) -> GradientSet:
    """Exact gradient of the mean log-likelihood (ascent direction).

    Data moments minus model moments, with hidden conditionals given by
    the exact copy-model mean.  The model term enumerates p(v) over all
    visible states, reusing the streamed partition function.
    """
    _require_enumerable(params)
    v2, _ = as_batch(dataset, params.n_visible, "dataset")
    if weights is None:
        w = np.full(v2.shape[0], 1.0 / v2.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (v2.shape[0],):
            raise ValueError(
                f"weights shape {w.shape} does not match {v2.shape[0]} samples"
            )
        w = w / w.sum()
    da_data, db_data, dw_data = _moments(params, v2, w)

    log_z = log_partition_exact(params, chunk=chunk)
    n_states = 1 << params.n_visible
    da_model = np.zeros(params.n_visible)
    db_model = np.zeros(params.n_hidden)
    dw_model = np.zeros((params.n_visible, params.n_hidden))
    for start in range(0, n_states, chunk):
        idx = np.arange(start, min(start + chunk, n_states), dtype=np.int64)
        states = enumerate_binary_states(params.n_visible, idx)
        p = np.exp(-free_energy(params, states) - log_z)
        a_c, b_c, w_c = _moments(params, states, p)
        da_model += a_c
        db_model += b_c
        dw_model += w_c
    return GradientSet(
        d_visible_bias=da_data - da_model,
        d_hidden_bias=db_data - db_model,
        d_weights=dw_data - dw_model,
    )
