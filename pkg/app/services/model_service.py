"""
Dilated-CNN GCI detector: a stack of [conv (dilated, valid) -> SELU -> maxpool(2)]
feeding two heads that share the centre-window features:

    classification: dense(head_hidden) -> SELU -> dense(1) -> sigmoid
    regression:     dense(head_hidden) -> SELU -> dense(1) -> hardtanh[0, wd]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from app.core.errors import DataError, UsageError
from app.core.nn import ops
from app.core.nn.initializers import selu_init, zeros_init
from app.core.nn.optim import AdamaxState, Params
from app.schemas.model import ModelConfig

HEADS = ("cls", "reg")


@dataclass(frozen=True)
class StackLayout:
    """Symbolic shape/receptive-field bookkeeping through the conv/pool stack."""

    dilations: tuple[int, ...]
    conv_lengths: tuple[int, ...]
    pool_lengths: tuple[int, ...]
    # Output step t covers input samples [t * stride, t * stride + receptive_size).
    stride: int
    receptive_size: int
    slice_start: int
    slice_steps: int
    channels: int

    @property
    def output_length(self) -> int:
        return self.pool_lengths[-1]

    @property
    def feature_dim(self) -> int:
        return self.channels * self.slice_steps

    def step_center(self, step: int | np.ndarray) -> float | np.ndarray:
        return step * self.stride + (self.receptive_size - 1) / 2.0


def _shape_error(message: str) -> UsageError:
    return UsageError(code="BAD_MODEL_SHAPE", message=message)


def plan_layout(cfg: ModelConfig) -> StackLayout:
    kernel = cfg.kernel_size
    length = cfg.wi_samples
    stride, size = 1, 1
    dilations: list[int] = []
    conv_lengths: list[int] = []
    pool_lengths: list[int] = []
    for layer in range(cfg.num_conv_layers):
        if cfg.dilations is not None:
            dilation = cfg.dilations[layer]
        else:
            dilation = 2**layer
            if kernel > 1:
                # Largest dilation that still leaves 2 samples for the pool.
                dilation = min(dilation, (length - 2) // (kernel - 1))
        if dilation < 1:
            raise _shape_error(f"Layer {layer} has no room for a kernel of {kernel} on {length} samples.")
        conv_length = ops.conv_output_length(length, kernel, dilation)
        if conv_length < 2:
            raise _shape_error(
                f"Layer {layer} (kernel {kernel}, dilation {dilation}) leaves {conv_length} samples from {length}."
            )
        size += (kernel - 1) * dilation * stride
        size += stride
        stride *= 2
        length = conv_length // 2
        dilations.append(dilation)
        conv_lengths.append(conv_length)
        pool_lengths.append(length)

    steps = math.ceil(cfg.wd_samples / stride)
    if steps > length:
        raise _shape_error(
            f"Final time axis has {length} steps but the {cfg.wd_samples}-sample centre window needs {steps}."
        )
    target = cfg.context_samples + (cfg.wd_samples - 1) / 2.0
    ideal = (target - (size - 1) / 2.0) / stride - (steps - 1) / 2.0
    # ideal is the real-valued first step whose window centres on the detection window.
    candidates = {min(max(bound, 0), length - steps) for bound in (math.floor(ideal), math.ceil(ideal))}
    start = min(candidates, key=lambda s: (abs(s - ideal), s))

    layout = StackLayout(
        dilations=tuple(dilations),
        conv_lengths=tuple(conv_lengths),
        pool_lengths=tuple(pool_lengths),
        stride=stride,
        receptive_size=size,
        slice_start=start,
        slice_steps=steps,
        channels=cfg.channels,
    )
    centers = layout.step_center(np.arange(start, start + steps))
    if np.any(centers < 0) or np.any(centers >= cfg.wi_samples):
        raise _shape_error("No output step is centred inside the input frame.")
    return layout


@dataclass(eq=False)
class Model:
    config: ModelConfig
    params: Params
    optimizer: AdamaxState = field(default_factory=AdamaxState)

    @cached_property
    def layout(self) -> StackLayout:
        return plan_layout(self.config)

    def predict(self, frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return forward(self, frames)


def _param_shapes(cfg: ModelConfig, layout: StackLayout) -> list[tuple[str, tuple[int, ...], int]]:
    shapes: list[tuple[str, tuple[int, ...], int]] = []
    in_channels = 1
    for layer in range(cfg.num_conv_layers):
        fan_in = in_channels * cfg.kernel_size
        shapes.append((f"conv{layer}.weight", (cfg.channels, in_channels, cfg.kernel_size), fan_in))
        shapes.append((f"conv{layer}.bias", (cfg.channels,), 0))
        in_channels = cfg.channels
    for head in HEADS:
        shapes.append((f"{head}.hidden.weight", (cfg.head_hidden, layout.feature_dim), layout.feature_dim))
        shapes.append((f"{head}.hidden.bias", (cfg.head_hidden,), 0))
        shapes.append((f"{head}.out.weight", (1, cfg.head_hidden), cfg.head_hidden))
        shapes.append((f"{head}.out.bias", (1,), 0))
    return shapes


def build_model(cfg: ModelConfig, seed: int) -> Model:
    layout = plan_layout(cfg)
    resolved = cfg.model_copy(update={"dilations": layout.dilations})
    rng = np.random.default_rng(seed)
    params: Params = {}
    for name, shape, fan_in in _param_shapes(resolved, layout):
        params[name] = zeros_init(shape) if name.endswith(".bias") else selu_init(shape, fan_in, rng)
    return Model(config=resolved, params=params, optimizer=AdamaxState.fresh(params))


def center_slice(features: np.ndarray, layout: StackLayout) -> np.ndarray:
    if features.shape[2] < layout.slice_start + layout.slice_steps:
        raise _shape_error(f"Feature map of length {features.shape[2]} is shorter than the centre slice.")
    window = features[:, :, layout.slice_start : layout.slice_start + layout.slice_steps]
    return window.reshape(features.shape[0], -1)


def scale_inputs(batch: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    if cfg.input_scale == "none":
        return batch
    peak = np.max(np.abs(batch), axis=1, keepdims=True)
    return batch / np.where(peak > 0, peak, 1.0)


@dataclass
class ForwardCache:
    conv_inputs: list[np.ndarray]
    conv_outputs: list[np.ndarray]
    pool_argmax: list[np.ndarray]
    features: np.ndarray
    head_hidden: dict[str, np.ndarray]
    head_activations: dict[str, np.ndarray]
    head_logits: dict[str, np.ndarray]
    y_c: np.ndarray
    y_r: np.ndarray


def forward_with_cache(model: Model, batch: np.ndarray) -> ForwardCache:
    cfg = model.config
    params = model.params
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != cfg.wi_samples:
        raise DataError(
            code="FRAME_LENGTH_MISMATCH",
            message=f"Model expects frames of {cfg.wi_samples} samples, got shape {batch.shape}.",
        )
    layout = model.layout
    x = scale_inputs(batch, cfg)[:, None, :]
    conv_inputs, conv_outputs, pool_argmax = [], [], []
    for layer, dilation in enumerate(layout.dilations):
        z = ops.conv1d_forward(x, params[f"conv{layer}.weight"], params[f"conv{layer}.bias"], dilation)
        pooled, argmax = ops.maxpool_forward(ops.selu(z))
        conv_inputs.append(x)
        conv_outputs.append(z)
        pool_argmax.append(argmax)
        x = pooled

    features = center_slice(x, layout)
    hidden, activations, logits = {}, {}, {}
    for head in HEADS:
        hidden[head] = ops.dense_forward(features, params[f"{head}.hidden.weight"], params[f"{head}.hidden.bias"])
        activations[head] = ops.selu(hidden[head])
        logits[head] = ops.dense_forward(activations[head], params[f"{head}.out.weight"], params[f"{head}.out.bias"])[:, 0]

    return ForwardCache(
        conv_inputs=conv_inputs,
        conv_outputs=conv_outputs,
        pool_argmax=pool_argmax,
        features=features,
        head_hidden=hidden,
        head_activations=activations,
        head_logits=logits,
        y_c=ops.sigmoid(logits["cls"]),
        y_r=ops.hardtanh_bounded(logits["reg"], 0.0, float(cfg.wd_samples)),
    )


def forward(model: Model, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cache = forward_with_cache(model, batch)
    return cache.y_c, cache.y_r


def backward(model: Model, cache: ForwardCache, grad_y_c: np.ndarray, grad_y_r: np.ndarray) -> Params:
    params = model.params
    layout = model.layout
    grads: Params = {}

    head_logit_grads = {
        "cls": ops.sigmoid_backward(grad_y_c, cache.y_c),
        "reg": ops.hardtanh_bounded_backward(grad_y_r, cache.head_logits["reg"], 0.0, float(model.config.wd_samples)),
    }
    grad_features = np.zeros_like(cache.features)
    for head in HEADS:
        grad_act, grads[f"{head}.out.weight"], grads[f"{head}.out.bias"] = ops.dense_backward(
            head_logit_grads[head][:, None], cache.head_activations[head], params[f"{head}.out.weight"]
        )
        grad_hidden = ops.selu_backward(grad_act, cache.head_hidden[head])
        grad_in, grads[f"{head}.hidden.weight"], grads[f"{head}.hidden.bias"] = ops.dense_backward(
            grad_hidden, cache.features, params[f"{head}.hidden.weight"]
        )
        grad_features += grad_in

    batch = grad_features.shape[0]
    grad_map = np.zeros((batch, layout.channels, layout.output_length))
    grad_map[:, :, layout.slice_start : layout.slice_start + layout.slice_steps] = grad_features.reshape(
        batch, layout.channels, layout.slice_steps
    )
    for layer in reversed(range(len(layout.dilations))):
        z = cache.conv_outputs[layer]
        grad_act = ops.maxpool_backward(grad_map, cache.pool_argmax[layer], z.shape[2])
        grad_z = ops.selu_backward(grad_act, z)
        grad_map, grads[f"conv{layer}.weight"], grads[f"conv{layer}.bias"] = ops.conv1d_backward(
            grad_z, cache.conv_inputs[layer], params[f"conv{layer}.weight"], layout.dilations[layer]
        )
    return {name: grads[name] for name in params}
