"""Multinary activation family built from offset copies of a sigmoid unit.

A unit taking integer values 0..N is modeled as N weight-sharing binary
copies, the n-th copy firing with probability sigma(x - o_n).  Choosing
the offsets as o_n = f_inverse(n - 1/2) makes the expected copy count
track a smooth target activation f(x) = N * g(k * x).  The closed forms
below (mean, variance, antiderivative, offsets) are what every fast path
uses; the explicit sums over copies are kept as the slow reference that
the closed forms approximate, and the size of that approximation gap is
measured by the test suite rather than assumed.

Only g = sigmoid is implemented.  `unit_kind` is the extension point for
other unit functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMOID = "sigmoid"
_UNIT_KINDS = (SIGMOID,)


def sigmoid(x):
    """Elementwise logistic function 1 / (1 + exp(-x)), overflow-safe."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def softplus(x):
    """Elementwise log(1 + exp(x)) without overflow for large |x|."""
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def logit(p):
    """Inverse sigmoid, stable near both endpoints."""
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


@dataclass(frozen=True)
class ActivationSpec:
    """Defines a family of integer-valued units.

    A unit described by this spec takes values in {0, ..., n_levels} and
    has mean activity n_levels * g(scale * x) at pre-activation x.
    n_levels = 1 with scale = 1 is the ordinary binary sigmoid unit.

    Parameters
    ----------
    n_levels : int
        Number of binary copies; also the maximum unit value.
    scale : float
        Multiplier applied to the pre-activation before the unit function.
    unit_kind : str
        Unit function; only "sigmoid" is supported.
    """

    n_levels: int = 1
    scale: float = 1.0
    unit_kind: str = SIGMOID

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValueError(f"n_levels must be >= 1, got {self.n_levels}")
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")
        if self.unit_kind not in _UNIT_KINDS:
            raise ValueError(f"unknown unit_kind {self.unit_kind!r}")


BINARY = ActivationSpec(n_levels=1, scale=1.0)


def f_mean(spec: ActivationSpec, x):
    """Mean unit activity n_levels * sigmoid(scale * x).

    Strictly inside (0, n_levels) for any finite x, up to float underflow
    in the far tails.
    """
    return spec.n_levels * sigmoid(spec.scale * x)


def f_variance(spec: ActivationSpec, x):
    """Derivative of `f_mean` with respect to x; also the activity variance
    attributed to the smooth unit family."""
    s = sigmoid(spec.scale * x)
    return spec.n_levels * spec.scale * s * (1.0 - s)


def f_integral(spec: ActivationSpec, x):
    """Antiderivative of `f_mean` with the convention that it tends to 0
    as x -> -inf.

    For the sigmoid family this is (n_levels / scale) * softplus(scale * x),
    which grows like n_levels * x for large positive x without overflowing.
    """
    return (spec.n_levels / spec.scale) * softplus(spec.scale * x)


def offsets(spec: ActivationSpec) -> np.ndarray:
    """Per-copy offset biases o_n solving f_mean(o_n) = n - 1/2.

    Returns a strictly increasing vector of length n_levels.  For the
    sigmoid family o_n = logit((n - 1/2) / n_levels) / scale.
    """
    n = np.arange(1, spec.n_levels + 1, dtype=np.float64)
    return logit((n - 0.5) / spec.n_levels) / spec.scale


def sum_sigmoid_mean(spec: ActivationSpec, x):
    """Exact mean of the copy model: sum over n of sigmoid(x - o_n).

    This is the ground truth that `f_mean` approximates; the sup-norm gap
    between the two is a measured property of the family, not a bound the
    code relies on.
    """
    x = np.asarray(x, dtype=np.float64)
    s = sigmoid(x[..., None] - offsets(spec))
    return s.sum(axis=-1)


def sum_sigmoid_var(spec: ActivationSpec, x):
    """Exact variance of the copy model: sum of sigma * (1 - sigma) over
    the offset copies."""
    x = np.asarray(x, dtype=np.float64)
    s = sigmoid(x[..., None] - offsets(spec))
    return (s * (1.0 - s)).sum(axis=-1)
