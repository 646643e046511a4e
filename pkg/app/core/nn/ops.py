"""
Forward/backward pairs. Signals are (batch, channels, time), head inputs are
(batch, features). Every operator checks its output for NaN/Inf and raises
`NumericalError` naming itself, so a blow-up is reported where it happens.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from app.core.errors import NumericalError

SELU_LAMBDA = 1.0507009873554804934193349852946
SELU_ALPHA = 1.6732632423543772848170429916717


def ensure_finite(operator: str, *arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NumericalError(
                code="NON_FINITE",
                message=f"{operator} produced NaN or Inf.",
                operator=operator,
            )


def _dilated_windows(x: np.ndarray, kernel_size: int, dilation: int) -> np.ndarray:
    span = (kernel_size - 1) * dilation + 1
    return sliding_window_view(x, span, axis=2)[..., ::dilation]


def conv_output_length(length: int, kernel_size: int, dilation: int) -> int:
    return length - (kernel_size - 1) * dilation


def conv1d_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray, dilation: int) -> np.ndarray:
    """Valid, stride-1 dilated convolution: y[b,o,t] = bias[o] + sum_{c,k} w[o,c,k] x[b,c,t+k*d]."""
    if x.ndim != 3 or weights.ndim != 3 or bias.shape != (weights.shape[0],):
        raise ValueError(f"conv1d shape mismatch: x{x.shape} w{weights.shape} b{bias.shape}")
    if x.shape[1] != weights.shape[1]:
        raise ValueError(f"conv1d expects {weights.shape[1]} input channels, got {x.shape[1]}")
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    kernel_size = weights.shape[2]
    if conv_output_length(x.shape[2], kernel_size, dilation) < 1:
        raise ValueError(
            f"conv1d input of length {x.shape[2]} too short for kernel {kernel_size} at dilation {dilation}"
        )
    windows = _dilated_windows(x, kernel_size, dilation)
    y = np.tensordot(windows, weights, axes=([1, 3], [1, 2])).transpose(0, 2, 1)
    y = np.ascontiguousarray(y + bias[None, :, None])
    ensure_finite("conv1d_forward", y)
    return y


def conv1d_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    weights: np.ndarray,
    dilation: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    kernel_size = weights.shape[2]
    out_length = conv_output_length(x.shape[2], kernel_size, dilation)
    expected = (x.shape[0], weights.shape[0], out_length)
    if grad_out.shape != expected:
        raise ValueError(f"conv1d_backward expects grad of shape {expected}, got {grad_out.shape}")

    windows = _dilated_windows(x, kernel_size, dilation)
    grad_b = grad_out.sum(axis=(0, 2))
    grad_w = np.tensordot(grad_out, windows, axes=([0, 2], [0, 2]))
    # contributions[b, t, c, k] lands on x[b, c, t + k*d]
    contributions = np.tensordot(grad_out, weights, axes=([1], [0]))
    grad_x = np.zeros_like(x)
    for k in range(kernel_size):
        start = k * dilation
        grad_x[:, :, start : start + out_length] += contributions[:, :, :, k].transpose(0, 2, 1)
    ensure_finite("conv1d_backward", grad_x, grad_w, grad_b)
    return grad_x, grad_w, grad_b


def maxpool_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kernel 2, stride 2; an odd trailing sample is dropped, ties pick the earlier index."""
    if x.ndim != 3 or x.shape[2] < 2:
        raise ValueError(f"maxpool needs (B, C, T>=2), got {x.shape}")
    half = x.shape[2] // 2
    pairs = x[:, :, : 2 * half].reshape(x.shape[0], x.shape[1], half, 2)
    argmax = pairs.argmax(axis=-1)
    y = np.take_along_axis(pairs, argmax[..., None], axis=-1)[..., 0]
    ensure_finite("maxpool_forward", y)
    return y, argmax


def maxpool_backward(grad_out: np.ndarray, argmax: np.ndarray, input_length: int) -> np.ndarray:
    if grad_out.shape != argmax.shape:
        raise ValueError("maxpool_backward gradient and argmax shapes differ")
    batch, channels, half = grad_out.shape
    grad_pairs = np.zeros((batch, channels, half, 2), dtype=grad_out.dtype)
    np.put_along_axis(grad_pairs, argmax[..., None], grad_out[..., None], axis=-1)
    grad_x = np.zeros((batch, channels, input_length), dtype=grad_out.dtype)
    grad_x[:, :, : 2 * half] = grad_pairs.reshape(batch, channels, 2 * half)
    return grad_x


def selu(x: np.ndarray) -> np.ndarray:
    y = np.where(x > 0, SELU_LAMBDA * x, SELU_LAMBDA * SELU_ALPHA * np.expm1(np.minimum(x, 0.0)))
    ensure_finite("selu", y)
    return y


def selu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    slope = np.where(x > 0, SELU_LAMBDA, SELU_LAMBDA * SELU_ALPHA * np.exp(np.minimum(x, 0.0)))
    grad_x = grad_out * slope
    ensure_finite("selu_backward", grad_x)
    return grad_x


def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or weights.ndim != 2 or x.shape[1] != weights.shape[1] or bias.shape != (weights.shape[0],):
        raise ValueError(f"dense shape mismatch: x{x.shape} W{weights.shape} b{bias.shape}")
    y = x @ weights.T + bias
    ensure_finite("dense_forward", y)
    return y


def dense_backward(
    grad_out: np.ndarray,
    x: np.ndarray,
    weights: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if grad_out.shape != (x.shape[0], weights.shape[0]):
        raise ValueError(f"dense_backward expects grad of shape {(x.shape[0], weights.shape[0])}, got {grad_out.shape}")
    grad_x = grad_out @ weights
    grad_w = grad_out.T @ x
    grad_b = grad_out.sum(axis=0)
    ensure_finite("dense_backward", grad_x, grad_w, grad_b)
    return grad_x, grad_w, grad_b


def sigmoid(x: np.ndarray) -> np.ndarray:
    y = expit(x)
    ensure_finite("sigmoid", y)
    return y


def sigmoid_backward(grad_out: np.ndarray, y: np.ndarray) -> np.ndarray:
    return grad_out * y * (1.0 - y)


def hardtanh_bounded(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if not lo < hi:
        raise ValueError(f"hardtanh bounds need lo < hi, got [{lo}, {hi}]")
    y = np.clip(x, lo, hi)
    ensure_finite("hardtanh_bounded", y)
    return y


def hardtanh_bounded_backward(grad_out: np.ndarray, x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    return np.where((x > lo) & (x < hi), grad_out, 0.0)
