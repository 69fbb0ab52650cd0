"""Parameter containers, validation, and initialization for RBM layers.

All containers are frozen dataclasses: training never mutates a layer in
place, it builds new parameter arrays through the optimizer.  That makes
every value here safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .activations import ActivationSpec, logit

# Initial weight scale.  Pre-activations are x = b + v @ W with visible
# values spanning 0..N_v, so a standard deviation of 0.01 / (k_h * N_v)
# keeps k_h * x within a few units of zero at step 0 and the hidden
# sigmoids out of saturation.
INIT_WEIGHT_SCALE = 0.01


@dataclass(frozen=True)
class RbmParams:
    """One fully-connected RBM layer.

    visible_bias has length V, hidden_bias length H, weights shape (V, H).
    """

    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    weights: np.ndarray
    visible_spec: ActivationSpec = ActivationSpec()
    hidden_spec: ActivationSpec = ActivationSpec()

    @property
    def n_visible(self) -> int:
        return self.visible_bias.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.hidden_bias.shape[0]


@dataclass(frozen=True)
class ConvRbmParams:
    """One strided convolutional RBM layer.

    filters has shape (out_channels, in_channels, kernel, kernel); biases
    are per channel.  input_size optionally records the spatial size of
    the images the layer was trained on, which downstream generation
    needs to rebuild activation shapes.
    """

    filters: np.ndarray
    hidden_bias: np.ndarray
    visible_bias: np.ndarray
    stride: int = 2
    visible_spec: ActivationSpec = ActivationSpec()
    hidden_spec: ActivationSpec = ActivationSpec()
    input_size: tuple[int, int] | None = None

    @property
    def out_channels(self) -> int:
        return self.filters.shape[0]

    @property
    def in_channels(self) -> int:
        return self.filters.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.filters.shape[2]


@dataclass(frozen=True)
class GradientSet:
    """Gradients with respect to (visible_bias, hidden_bias, weights).

    Shapes mirror the owning layer; for convolutional layers d_weights
    holds the filter-shaped gradient.
    """

    d_visible_bias: np.ndarray
    d_hidden_bias: np.ndarray
    d_weights: np.ndarray

    def __neg__(self) -> "GradientSet":
        return GradientSet(-self.d_visible_bias, -self.d_hidden_bias, -self.d_weights)


@dataclass
class DbnModel:
    """A stack of RBM layers, bottom first.

    Layers are RbmParams or ConvRbmParams; each layer's input is the
    previous layer's hidden activity.  metadata carries run information
    (seed, hyperparameters, input shape) that is not part of the
    serialized parameter container.
    """

    layers: list
    metadata: dict = field(default_factory=dict)


def init_params(
    n_visible: int,
    n_hidden: int,
    visible_spec: ActivationSpec = ActivationSpec(),
    hidden_spec: ActivationSpec = ActivationSpec(),
    seed: int = 0,
) -> RbmParams:
    """Build a fresh dense layer: zero biases, small Gaussian weights.

    Weights are i.i.d. zero-mean normal with standard deviation
    0.01 / (hidden scale * visible n_levels); deterministic for a fixed
    seed.
    """
    if n_visible < 1 or n_hidden < 1:
        raise ValueError(
            f"layer dimensions must be >= 1, got ({n_visible}, {n_hidden})"
        )
    rng = np.random.default_rng(seed)
    std = INIT_WEIGHT_SCALE / (hidden_spec.scale * visible_spec.n_levels)
    return RbmParams(
        visible_bias=np.zeros(n_visible),
        hidden_bias=np.zeros(n_hidden),
        weights=rng.normal(0.0, std, size=(n_visible, n_hidden)),
        visible_spec=visible_spec,
        hidden_spec=hidden_spec,
    )


def init_conv_params(
    in_channels: int,
    out_channels: int,
    kernel_size: int = 4,
    stride: int = 2,
    visible_spec: ActivationSpec = ActivationSpec(),
    hidden_spec: ActivationSpec = ActivationSpec(),
    seed: int = 0,
    input_size: tuple[int, int] | None = None,
    dtype=np.float64,
) -> ConvRbmParams:
    """Build a fresh convolutional layer (same weight scale rule as dense).

    dtype may be float32 for large stacks; gradient checking requires the
    float64 default.
    """
    if in_channels < 1 or out_channels < 1:
        raise ValueError("channel counts must be >= 1")
    if kernel_size < 1 or stride < 1:
        raise ValueError("kernel_size and stride must be >= 1")
    rng = np.random.default_rng(seed)
    std = INIT_WEIGHT_SCALE / (hidden_spec.scale * visible_spec.n_levels)
    shape = (out_channels, in_channels, kernel_size, kernel_size)
    return ConvRbmParams(
        filters=rng.normal(0.0, std, size=shape).astype(dtype),
        hidden_bias=np.zeros(out_channels, dtype=dtype),
        visible_bias=np.zeros(in_channels, dtype=dtype),
        stride=stride,
        visible_spec=visible_spec,
        hidden_spec=hidden_spec,
        input_size=input_size,
    )


def visible_bias_from_means(spec: ActivationSpec, means: np.ndarray) -> np.ndarray:
    """Bias vector solving f_mean(spec, a) = means coordinate-wise.

    The classic warm start for the bottom layer: when the visible bias
    already reproduces the data marginals, the first updates go into
    structure instead of pushing the global mean mismatch into every
    weight column at once (which can saturate the hidden units for
    good).  Means are clipped away from the saturation limits before
    inverting.
    """
    p = np.asarray(means, dtype=np.float64) / spec.n_levels
    return logit(np.clip(p, 1e-4, 1.0 - 1e-4)) / spec.scale


def _check_finite(arr: np.ndarray, name: str, out: list) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        for idx in np.argwhere(bad):
            pos = tuple(int(i) for i in idx)
            out.append(f"{name} has non-finite entry {arr[pos]} at index {pos}")


def validate(params: RbmParams) -> list[str]:
    """Report every shape and finiteness violation of a dense layer.

    Returns an empty list when the layer is well-formed.  Total function:
    never raises on bad parameter values.
    """
    out: list[str] = []
    a, b, w = params.visible_bias, params.hidden_bias, params.weights
    if a.ndim != 1:
        out.append(f"visible_bias must be 1-D, got shape {a.shape}")
    if b.ndim != 1:
        out.append(f"hidden_bias must be 1-D, got shape {b.shape}")
    if w.ndim != 2:
        out.append(f"weights must be 2-D, got shape {w.shape}")
    if a.ndim == 1 and w.ndim == 2 and a.shape[0] != w.shape[0]:
        out.append(
            f"visible_bias has length {a.shape[0]} but weights has "
            f"{w.shape[0]} rows (fields visible_bias, weights)"
        )
    if b.ndim == 1 and w.ndim == 2 and b.shape[0] != w.shape[1]:
        out.append(
            f"hidden_bias has length {b.shape[0]} but weights has "
            f"{w.shape[1]} columns (fields hidden_bias, weights)"
        )
    for name, arr in (("visible_bias", a), ("hidden_bias", b), ("weights", w)):
        _check_finite(arr, name, out)
    return out


def validate_conv(params: ConvRbmParams) -> list[str]:
    """Like `validate` for a convolutional layer."""
    out: list[str] = []
    f, b, a = params.filters, params.hidden_bias, params.visible_bias
    if f.ndim != 4:
        out.append(f"filters must be 4-D, got shape {f.shape}")
    elif f.shape[2] != f.shape[3]:
        out.append(f"filters must be square, got kernel {f.shape[2:]}")
    if b.ndim != 1 or (f.ndim == 4 and b.shape[0] != f.shape[0]):
        out.append(
            f"hidden_bias shape {b.shape} does not match filter out_channels"
        )
    if a.ndim != 1 or (f.ndim == 4 and a.shape[0] != f.shape[1]):
        out.append(
            f"visible_bias shape {a.shape} does not match filter in_channels"
        )
    if params.stride < 1:
        out.append(f"stride must be >= 1, got {params.stride}")
    for name, arr in (("filters", f), ("hidden_bias", b), ("visible_bias", a)):
        _check_finite(arr, name, out)
    return out


def validate_model(model: DbnModel, input_shape: tuple | None = None) -> list[str]:
    """Validate every layer plus inter-layer compatibility.

    With input_shape given (either (features,) for a dense stack or
    (channels, height, width) for images) the spatial shapes are
    propagated through the stack and dense widths after convolutional
    layers are checked too.
    """
    out: list[str] = []
    if not model.layers:
        out.append("model has no layers")
        return out
    for i, layer in enumerate(model.layers):
        if isinstance(layer, RbmParams):
            out.extend(f"layer {i}: {v}" for v in validate(layer))
        elif isinstance(layer, ConvRbmParams):
            out.extend(f"layer {i}: {v}" for v in validate_conv(layer))
        else:
            out.append(f"layer {i}: unknown layer type {type(layer).__name__}")
    if out:
        return out

    for i in range(len(model.layers) - 1):
        lo, hi = model.layers[i], model.layers[i + 1]
        if lo.hidden_spec.n_levels != hi.visible_spec.n_levels:
            out.append(
                f"layer {i} hidden n_levels {lo.hidden_spec.n_levels} does not "
                f"match layer {i + 1} visible n_levels {hi.visible_spec.n_levels}"
            )
        if isinstance(lo, RbmParams) and isinstance(hi, RbmParams):
            if lo.n_hidden != hi.n_visible:
                out.append(
                    f"layer {i} output size {lo.n_hidden} does not match "
                    f"layer {i + 1} input size {hi.n_visible}"
                )
        elif isinstance(lo, ConvRbmParams) and isinstance(hi, ConvRbmParams):
            if lo.out_channels != hi.in_channels:
                out.append(
                    f"layer {i} output channels {lo.out_channels} do not match "
                    f"layer {i + 1} input channels {hi.in_channels}"
                )

    if input_shape is not None:
        shape = tuple(input_shape)
        for i, layer in enumerate(model.layers):
            if isinstance(layer, ConvRbmParams):
                if len(shape) != 3 or shape[0] != layer.in_channels:
                    out.append(
                        f"layer {i} expects {layer.in_channels}-channel images, "
                        f"input shape is {shape}"
                    )
                    break
                k, s = layer.kernel_size, layer.stride
                if shape[1] < k or shape[2] < k:
                    out.append(f"layer {i}: input {shape} smaller than kernel {k}")
                    break
                shape = (
                    layer.out_channels,
                    (shape[1] - k) // s + 1,
                    (shape[2] - k) // s + 1,
                )
            else:
                flat = int(np.prod(shape))
                if flat != layer.n_visible:
                    out.append(
                        f"layer {i} has {layer.n_visible} visible units but "
                        f"receives {flat} values (shape {shape})"
                    )
                    break
                shape = (layer.n_hidden,)
    return out
