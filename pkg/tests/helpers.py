"""Shared test utilities: finite differences, small random models, and
hand-rolled data fixtures."""

import struct

import numpy as np

from drbm import ActivationSpec, GradientSet, RbmParams


def random_rbm(
    seed,
    n_visible=4,
    n_hidden=3,
    n_levels=1,
    k=1.0,
    weight_scale=0.5,
    visible_levels=1,
):
    """A small RBM with nonzero biases and moderate random weights."""
    rng = np.random.default_rng(seed)
    return RbmParams(
        visible_bias=rng.normal(0.0, weight_scale, n_visible),
        hidden_bias=rng.normal(0.0, weight_scale, n_hidden),
        weights=rng.normal(0.0, weight_scale, (n_visible, n_hidden)),
        visible_spec=ActivationSpec(visible_levels, k),
        hidden_spec=ActivationSpec(n_levels, k),
    )


def binary_batch(seed, count, n_visible):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(count, n_visible)).astype(np.float64)


def fd_array(fn, arr, eps=1e-6):
    """Central finite differences of the scalar fn() with respect to arr.

    arr is perturbed in place and restored; fn must read it afresh on
    every call.
    """
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


def fd_gradient_set(fn, params, eps=1e-6):
    """Finite-difference GradientSet for a dense layer's three tensors."""
    return GradientSet(
        fd_array(fn, params.visible_bias, eps),
        fd_array(fn, params.hidden_bias, eps),
        fd_array(fn, params.weights, eps),
    )


def idx_images_bytes(arr):
    """Big-endian IDX bytes for a (count, rows, cols) uint8 image stack."""
    arr = np.asarray(arr, dtype=np.uint8)
    count, rows, cols = arr.shape
    return (
        bytes([0, 0, 0x08, 3])
        + struct.pack(">III", count, rows, cols)
        + arr.tobytes()
    )


def idx_labels_bytes(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return bytes([0, 0, 0x08, 1]) + struct.pack(">I", len(labels)) + labels.tobytes()


def max_rel_err(analytic, numeric):
    """Coordinate-wise |a - n| / max(1, |a|, |n|), maximized over tensors.

    The unit floor in the denominator makes the measure an absolute
    error for coordinates near zero and a relative one for large
    coordinates.
    """
    pairs = (
        (analytic.d_visible_bias, numeric.d_visible_bias),
        (analytic.d_hidden_bias, numeric.d_hidden_bias),
        (analytic.d_weights, numeric.d_weights),
    )
    worst = 0.0
    for a, n in pairs:
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst
