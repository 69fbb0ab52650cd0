"""Joint training of layer stacks and deep belief network plumbing.

All layers train together: each minibatch is propagated upward with
smooth hidden means, every layer computes its own contrastive loss on
its own (detached) input, the per-layer losses are summed for reporting,
and each layer takes one Adam step from its local gradient.  No gradient
crosses a layer boundary.  Convolutional activity is flattened in C
order whenever it feeds something that wants flat vectors (a dense
layer, a classifier probe).

Generation runs a stochastic Gibbs chain in the top layer and then maps
the sample down through the lower layers with visible means.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .activations import ActivationSpec, f_mean
from .conv import (
    ConvRbmParams,
    conv_hidden_pre,
    conv_loss_and_grad,
    conv_output_size,
    conv_transpose_pre,
)
from .loss import loss_and_grad
from .optim import AdamConfig, GradientSet, NumericalError, adam_step, init_adam
from .params import (
    DbnModel,
    RbmParams,
    init_conv_params,
    init_params,
    visible_bias_from_means,
)
from .sampling import (
    RngStream,
    gibbs_chain,
    hidden_mean,
    sample_hidden,
    sample_levels,
    visible_mean,
)
from .validation import as_generator


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for gradient descent on the stack.

    loss_norm picks whether each batch-summed gradient is divided by the
    batch size before its Adam step; reported losses are per-sample
    means either way.  grad_clip, when set, caps the global L2 norm of
    each layer's batch gradient.
    """

    learning_rate: float = 0.03
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 128
    n_epochs: int = 500
    recon_mode: str = "mean_field"
    loss_norm: str = "mean"
    grad_clip: float | None = None

    def __post_init__(self):
        if self.recon_mode not in ("mean_field", "stochastic"):
            raise ValueError(f"unknown recon_mode {self.recon_mode!r}")
        if self.loss_norm not in ("mean", "sum"):
            raise ValueError(f"unknown loss_norm {self.loss_norm!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.n_epochs < 0:
            raise ValueError(f"n_epochs must be >= 0, got {self.n_epochs}")


@dataclass(frozen=True)
class EpochReport:
    """Per-layer training metrics for one epoch.

    losses are per-sample means of the batch-summed contrastive loss;
    recon_errors are mean absolute deviations |v - v'| per element, both
    indexed by layer.
    """

    epoch: int
    losses: tuple
    recon_errors: tuple

    @property
    def total_loss(self) -> float:
        return float(sum(self.losses))


def _flatten(act: np.ndarray) -> np.ndarray:
    return act.reshape(act.shape[0], -1) if act.ndim > 2 else act


def _layer_input(layer, act: np.ndarray) -> np.ndarray:
    """Shape activations for a layer: flat rows for dense, maps for conv."""
    act = np.asarray(act, dtype=np.float64)
    if isinstance(layer, RbmParams):
        return _flatten(act)
    if act.ndim == 4:
        return act
    if layer.input_size is None:
        raise ValueError(
            "convolutional layer has no recorded input size; cannot reshape "
            f"flat activity of shape {act.shape}"
        )
    h, w = layer.input_size
    return act.reshape(act.shape[0], layer.in_channels, h, w)


def _layer_hidden(layer, act: np.ndarray, rng=None, mode: str = "mean_field"):
    """Hidden activity of one layer: smooth means or exact samples."""
    if isinstance(layer, RbmParams):
        if mode == "mean_field":
            return hidden_mean(layer, act)
        return sample_hidden(layer, act, rng)
    pre = conv_hidden_pre(layer, act)
    if mode == "mean_field":
        return f_mean(layer.hidden_spec, pre)
    return sample_levels(layer.hidden_spec, pre, rng)


def _hidden_map_size(layer: ConvRbmParams) -> tuple[int, int]:
    if layer.input_size is None:
        raise ValueError("convolutional layer has no recorded input size")
    return conv_output_size(layer, layer.input_size)


def _layer_visible_mean(layer, hidden_act: np.ndarray) -> np.ndarray:
    """Visible means given hidden activity, reshaping flat input as needed."""
    if isinstance(layer, RbmParams):
        return visible_mean(layer, _flatten(hidden_act))
    if hidden_act.ndim != 4:
        n_h, n_w = _hidden_map_size(layer)
        hidden_act = hidden_act.reshape(
            hidden_act.shape[0], layer.out_channels, n_h, n_w
        )
    pre = conv_transpose_pre(layer, hidden_act, layer.input_size)
    return f_mean(layer.visible_spec, pre)


def _layer_loss_and_grad(layer, batch: np.ndarray, rng=None, mode="mean_field"):
    if isinstance(layer, RbmParams):
        return loss_and_grad(layer, batch, rng=rng, mode=mode)
    return conv_loss_and_grad(layer, batch, rng=rng, mode=mode)


def _scaled(grads: GradientSet, factor: float) -> GradientSet:
    return GradientSet(
        grads.d_visible_bias * factor,
        grads.d_hidden_bias * factor,
        grads.d_weights * factor,
    )


def _clipped(grads: GradientSet, max_norm: float) -> GradientSet:
    sq = (
        float((grads.d_visible_bias**2).sum())
        + float((grads.d_hidden_bias**2).sum())
        + float((grads.d_weights**2).sum())
    )
    norm = np.sqrt(sq)
    if norm <= max_norm:
        return grads
    return _scaled(grads, max_norm / norm)


def _forward_inputs(layers, act: np.ndarray) -> list:
    """Each layer's input under mean propagation, all detached."""
    inputs = []
    for i, layer in enumerate(layers):
        try:
            inp = _layer_input(layer, act)
            inputs.append(inp)
            act = _layer_hidden(layer, inp)
        except ValueError as exc:
            raise ValueError(f"layer {i}: {exc}") from exc
    return inputs


def forward_means(model: DbnModel, data: np.ndarray, n_layers: int | None = None):
    """Smooth activity after propagating data up through n_layers.

    The default runs the full stack.  The result keeps the top layer's
    natural shape (maps for conv, rows for dense).
    """
    act = np.asarray(data, dtype=np.float64)
    for i, layer in enumerate(model.layers[:n_layers]):
        try:
            act = _layer_hidden(layer, _layer_input(layer, act))
        except ValueError as exc:
            raise ValueError(f"layer {i}: {exc}") from exc
    return act


def train_epoch(
    model: DbnModel,
    data: np.ndarray,
    states: list,
    config: TrainConfig,
    rng,
    epoch: int = 0,
):
    """One shuffled pass over the dataset, updating every layer.

    Per minibatch: forward means give each layer its input, each layer
    evaluates its own loss and gradient there, and each takes one Adam
    step.  Returns (model, states, report) without mutating the inputs.
    """
    gen = as_generator(rng)
    layers = list(model.layers)
    states = list(states)
    n = data.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    order = gen.permutation(n)
    loss_sums = np.zeros(len(layers))
    abs_sums = np.zeros(len(layers))
    elem_counts = np.zeros(len(layers))
    for start in range(0, n, config.batch_size):
        batch = data[order[start : start + config.batch_size]]
        inputs = _forward_inputs(layers, batch)
        results = []
        for i, (layer, inp) in enumerate(zip(layers, inputs)):
            result = _layer_loss_and_grad(
                layer, inp, rng=gen, mode=config.recon_mode
            )
            if not np.isfinite(result.loss):
                raise NumericalError(f"non-finite loss at layer {i}")
            results.append(result)
        for i, result in enumerate(results):
            grads = result.gradients
            if config.loss_norm == "mean":
                grads = _scaled(grads, 1.0 / batch.shape[0])
            if config.grad_clip is not None:
                grads = _clipped(grads, config.grad_clip)
            states[i], layers[i] = adam_step(states[i], layers[i], grads)
            loss_sums[i] += result.loss
            abs_sums[i] += float(np.abs(result.reconstructions - inputs[i]).sum())
            elem_counts[i] += inputs[i].size
    report = EpochReport(
        epoch=epoch,
        losses=tuple(float(x) for x in loss_sums / n),
        recon_errors=tuple(float(x) for x in abs_sums / elem_counts),
    )
    return DbnModel(layers, model.metadata), states, report


def train(
    model: DbnModel,
    data: np.ndarray,
    config: TrainConfig | None = None,
    seed: int = 0,
    callback=None,
):
    """Train a stack for config.n_epochs; fully reproducible from seed.

    One random stream derived from the seed drives shuffling and any
    reconstruction noise.  callback, when given, sees each EpochReport
    as it is produced.  Returns the trained model and all reports.
    """
    if config is None:
        config = TrainConfig()
    if not model.layers:
        raise ValueError("model has no layers")
    data = _layer_input(model.layers[0], np.asarray(data, dtype=np.float64))
    states = [
        init_adam(
            layer, AdamConfig(config.learning_rate, config.beta1, config.beta2)
        )
        for layer in model.layers
    ]
    gen = RngStream(seed, 1).generator()
    reports = []
    for epoch in range(config.n_epochs):
        model, states, report = train_epoch(
            model, data, states, config, gen, epoch
        )
        reports.append(report)
        if callback is not None:
            callback(report)
    return model, reports


def train_layer(
    layer,
    data: np.ndarray,
    config: TrainConfig | None = None,
    seed: int = 0,
    callback=None,
):
    """Train a single layer; convenience wrapper over `train`."""
    model, reports = train(DbnModel([layer]), data, config, seed, callback)
    return model.layers[0], reports


def reconstruct_model(
    model: DbnModel, data: np.ndarray, rng=None, mode: str = "mean_field"
) -> np.ndarray:
    """One pass up the whole stack and back down.

    Encodes with hidden means (or samples in stochastic mode) to the top
    hidden layer, then decodes with visible means.  The output has the
    input's shape.
    """
    act = np.asarray(data, dtype=np.float64)
    orig_shape = act.shape
    gen = as_generator(rng) if mode == "stochastic" else None
    for i, layer in enumerate(model.layers):
        try:
            act = _layer_hidden(layer, _layer_input(layer, act), rng=gen, mode=mode)
        except ValueError as exc:
            raise ValueError(f"layer {i}: {exc}") from exc
    for layer in reversed(model.layers):
        act = _layer_visible_mean(layer, act)
    return act.reshape(orig_shape)


_CONV_RE = re.compile(r"conv:(\d+)x(\d+)s(\d+)\Z")
_DENSE_RE = re.compile(r"dense:(\d+)\Z")


def parse_architecture(text: str) -> list[tuple]:
    """Parse an architecture string into layer descriptors.

    Grammar: comma-separated layers, each either "dense:H" (H hidden
    units) or "conv:CxKsS" (C output channels, KxK kernel, stride S).
    Example: "conv:8x4s2,dense:64".
    """
    descriptors = []
    for part in text.split(","):
        part = part.strip()
        m = _DENSE_RE.match(part)
        if m:
            descriptors.append(("dense", int(m.group(1))))
            continue
        m = _CONV_RE.match(part)
        if m:
            descriptors.append(
                ("conv", int(m.group(1)), int(m.group(2)), int(m.group(3)))
            )
            continue
        raise ValueError(
            f"bad architecture part {part!r}; expected dense:H or conv:CxKsS"
        )
    if not descriptors:
        raise ValueError("architecture is empty")
    return descriptors


def build_dbn(
    architecture: str,
    input_shape: tuple,
    data_spec: ActivationSpec,
    unit_spec: ActivationSpec,
    seed: int = 0,
) -> DbnModel:
    """Initialize a stack from an architecture string.

    input_shape is (features,) for flat data or (channels, height,
    width) for images; data_spec describes the data's value range and
    unit_spec the hidden units of every layer.  Convolutional layers
    must come before any dense layer so their spatial input is defined.
    """
    descriptors = parse_architecture(architecture)
    layers = []
    shape = tuple(int(s) for s in input_shape)
    vspec = data_spec
    for i, desc in enumerate(descriptors):
        if desc[0] == "conv":
            if len(shape) != 3:
                raise ValueError(
                    f"layer {i} is convolutional but its input shape {shape} "
                    "is not (channels, height, width)"
                )
            _, channels, kernel, stride = desc
            layer = init_conv_params(
                shape[0],
                channels,
                kernel,
                stride,
                visible_spec=vspec,
                hidden_spec=unit_spec,
                seed=seed + i,
                input_size=shape[1:],
            )
            shape = (channels, *conv_output_size(layer, shape[1:]))
        else:
            layer = init_params(
                int(np.prod(shape)),
                desc[1],
                visible_spec=vspec,
                hidden_spec=unit_spec,
                seed=seed + i,
            )
            shape = (desc[1],)
        layers.append(layer)
        vspec = unit_spec
    metadata = {
        "architecture": architecture,
        "input_shape": list(int(s) for s in input_shape),
        "seed": seed,
    }
    return DbnModel(layers, metadata)


def warm_start_visible(model: DbnModel, data: np.ndarray) -> DbnModel:
    """Match layer 0's visible bias to the data marginals.

    Returns a new model; the weights and all other layers are shared
    unchanged.  Convolutional bottoms get per-channel means.
    """
    if not model.layers:
        return model
    first = model.layers[0]
    act = _layer_input(first, np.asarray(data, dtype=np.float64))
    axes = (0, 2, 3) if act.ndim == 4 else (0,)
    bias = visible_bias_from_means(first.visible_spec, act.mean(axis=axes))
    warmed = replace(first, visible_bias=bias)
    return DbnModel([warmed, *model.layers[1:]], model.metadata)


def _conv_chain(layer: ConvRbmParams, v: np.ndarray, steps: int, gen) -> np.ndarray:
    size = layer.input_size
    for _ in range(steps):
        h = sample_levels(layer.hidden_spec, conv_hidden_pre(layer, v), gen)
        v = sample_levels(
            layer.visible_spec, conv_transpose_pre(layer, h, size), gen
        )
    return v


def generate(
    model: DbnModel, count: int, steps: int = 200, rng=None
) -> np.ndarray:
    """Draw samples from the model.

    Runs a stochastic Gibbs chain in the top layer from uniform random
    starts, takes one final hidden sample, and decodes it down through
    every layer with visible means.  Output values are smooth means in
    the data range.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    gen = as_generator(rng)
    top = model.layers[-1]
    levels = top.visible_spec.n_levels
    if isinstance(top, RbmParams):
        v = gen.integers(0, levels + 1, size=(count, top.n_visible)).astype(
            np.float64
        )
        v = gibbs_chain(top, v, steps=steps, rng=gen, mode="stochastic")
        h = sample_hidden(top, v, gen)
        act = visible_mean(top, h)
    else:
        if top.input_size is None:
            raise ValueError("convolutional top layer has no recorded input size")
        h_in, w_in = top.input_size
        v = gen.integers(
            0, levels + 1, size=(count, top.in_channels, h_in, w_in)
        ).astype(np.float64)
        v = _conv_chain(top, v, steps, gen)
        h = sample_levels(top.hidden_spec, conv_hidden_pre(top, v), gen)
        act = f_mean(top.visible_spec, conv_transpose_pre(top, h, top.input_size))
    for layer in reversed(model.layers[:-1]):
        act = _layer_visible_mean(layer, act)
    return act
