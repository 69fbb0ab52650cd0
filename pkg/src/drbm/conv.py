"""Strided convolutional RBM layers.

Images are (batch, channels, height, width) arrays.  The hidden layer is
a valid (no padding) strided cross-correlation of the input with the
filter bank; the visible direction is the matching transposed
convolution.  When the stride does not tile the image exactly, the
trailing uncovered pixels take part in no filter window and are
reconstructed from the visible bias alone.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .activations import f_integral, f_mean
from .loss import LossBatchResult
from .params import ConvRbmParams, GradientSet
from .sampling import sample_levels
from .validation import as_generator


def as_image_batch(x, channels: int, name: str = "images"):
    """Coerce to a float64 (B, C, H, W) batch; a 3-D input is one image."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    if arr.ndim != 4:
        raise ValueError(f"{name} must be (batch, channels, height, width), got shape {arr.shape}")
    if arr.shape[1] != channels:
        raise ValueError(
            f"{name} has {arr.shape[1]} channels, layer expects {channels}"
        )
    return arr, single


def conv_output_size(params: ConvRbmParams, input_size: tuple[int, int]) -> tuple[int, int]:
    """Hidden map size for a given image size (valid strided conv)."""
    h, w = input_size
    k, s = params.kernel_size, params.stride
    if h < k or w < k:
        raise ValueError(f"input {input_size} is smaller than the {k}x{k} kernel")
    return (h - k) // s + 1, (w - k) // s + 1


def _windows(images: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """All strided kernel windows, shaped (B, H_out, W_out, C, K, K)."""
    w = sliding_window_view(images, (kernel, kernel), axis=(2, 3))
    w = w[:, :, ::stride, ::stride]
    return np.moveaxis(w, 1, 3)


def conv_hidden_pre(params: ConvRbmParams, images: np.ndarray) -> np.ndarray:
    """Hidden pre-activations, shape (B, out_channels, H_out, W_out)."""
    imgs, single = as_image_batch(images, params.in_channels)
    conv_output_size(params, imgs.shape[2:])
    win = _windows(imgs, params.kernel_size, params.stride)
    pre = np.einsum("bijckl,ockl->boij", win, params.filters)
    pre += params.hidden_bias[None, :, None, None]
    return pre[0] if single else pre


def conv_hidden_mean(params: ConvRbmParams, images: np.ndarray) -> np.ndarray:
    return f_mean(params.hidden_spec, conv_hidden_pre(params, images))


def conv_transpose_pre(
    params: ConvRbmParams, hidden: np.ndarray, output_size: tuple[int, int]
) -> np.ndarray:
    """Visible pre-activations from hidden activity (transposed conv).

    Scatters each hidden unit's contribution back through its filter
    window and adds the per-channel visible bias everywhere, including
    pixels no window covers.
    """
    h = np.asarray(hidden, dtype=np.float64)
    single = h.ndim == 3
    if single:
        h = h[None]
    if h.ndim != 4 or h.shape[1] != params.out_channels:
        raise ValueError(
            f"hidden must be (batch, {params.out_channels}, H, W), got shape {hidden.shape}"
        )
    height, width = output_size
    n_h, n_w = conv_output_size(params, output_size)
    if h.shape[2] != n_h or h.shape[3] != n_w:
        raise ValueError(
            f"hidden map {h.shape[2:]} does not match output_size {output_size} "
            f"(expected {(n_h, n_w)})"
        )
    k, s = params.kernel_size, params.stride
    out = np.zeros((h.shape[0], params.in_channels, height, width))
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki : ki + s * n_h : s, kj : kj + s * n_w : s] += np.einsum(
                "boij,oc->bcij", h, params.filters[:, :, ki, kj]
            )
    out += params.visible_bias[None, :, None, None]
    return out[0] if single else out


def conv_reconstruct(
    params: ConvRbmParams, images: np.ndarray, rng=None, mode: str = "mean_field"
) -> np.ndarray:
    """One up-down pass through the convolutional layer."""
    imgs, single = as_image_batch(images, params.in_channels)
    pre = conv_hidden_pre(params, imgs)
    if mode == "mean_field":
        h = f_mean(params.hidden_spec, pre)
    elif mode == "stochastic":
        h = sample_levels(params.hidden_spec, pre, as_generator(rng))
    else:
        raise ValueError(f"unknown reconstruction mode {mode!r}")
    vis_pre = conv_transpose_pre(params, h, imgs.shape[2:])
    out = f_mean(params.visible_spec, vis_pre)
    return out[0] if single else out


def conv_free_energy_integral(params: ConvRbmParams, images: np.ndarray) -> np.ndarray:
    """Integral-form free energy per image."""
    imgs, single = as_image_batch(images, params.in_channels)
    pre = conv_hidden_pre(params, imgs)
    f = -np.einsum("bchw,c->b", imgs, params.visible_bias)
    f -= f_integral(params.hidden_spec, pre).sum(axis=(1, 2, 3))
    return f[0] if single else f


def conv_contrastive_loss(
    params: ConvRbmParams, images: np.ndarray, recon: np.ndarray
) -> float:
    """Batch-summed F(v) - F(v') for a convolutional layer."""
    imgs, _ = as_image_batch(images, params.in_channels)
    rec, _ = as_image_batch(recon, params.in_channels, "recon")
    if imgs.shape != rec.shape:
        raise ValueError(f"images {imgs.shape} and recon {rec.shape} differ")
    return float(
        conv_free_energy_integral(params, imgs).sum()
        - conv_free_energy_integral(params, rec).sum()
    )


def _conv_moment_diff(params: ConvRbmParams, v: np.ndarray, v_prime: np.ndarray):
    k, s = params.kernel_size, params.stride
    win = _windows(v, k, s)
    win_p = _windows(v_prime, k, s)
    bias = params.hidden_bias[None, :, None, None]
    hm = f_mean(
        params.hidden_spec,
        np.einsum("bijckl,ockl->boij", win, params.filters) + bias,
    )
    hm_p = f_mean(
        params.hidden_spec,
        np.einsum("bijckl,ockl->boij", win_p, params.filters) + bias,
    )
    da = (v_prime - v).sum(axis=(0, 2, 3))
    db = (hm_p - hm).sum(axis=(0, 2, 3))
    dw = np.einsum("bijckl,boij->ockl", win_p, hm_p) - np.einsum(
        "bijckl,boij->ockl", win, hm
    )
    return da, db, dw


def conv_loss_gradient(
    params: ConvRbmParams, images: np.ndarray, recon: np.ndarray
) -> GradientSet:
    """Analytic gradient of `conv_contrastive_loss` with recon constant.

    d_weights holds the filter-shaped gradient.
    """
    imgs, _ = as_image_batch(images, params.in_channels)
    rec, _ = as_image_batch(recon, params.in_channels, "recon")
    if imgs.shape != rec.shape:
        raise ValueError(f"images {imgs.shape} and recon {rec.shape} differ")
    da, db, dw = _conv_moment_diff(params, imgs, rec)
    return GradientSet(da, db, dw)


def conv_loss_and_grad(
    params: ConvRbmParams, images: np.ndarray, rng=None, mode: str = "mean_field"
) -> LossBatchResult:
    """Reconstruct once, then evaluate loss and gradient on that v'."""
    imgs, _ = as_image_batch(images, params.in_channels)
    rec = conv_reconstruct(params, imgs, rng=rng, mode=mode)
    return LossBatchResult(
        loss=conv_contrastive_loss(params, imgs, rec),
        reconstructions=rec,
        gradients=conv_loss_gradient(params, imgs, rec),
    )
