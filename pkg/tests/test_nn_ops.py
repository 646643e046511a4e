from __future__ import annotations

import numpy as np
import pytest

from app.core.errors import NumericalError
from app.core.nn import ops
from app.core.nn.gradcheck import numerical_gradient, relative_error

TOLERANCE = 1e-4


def _brute_force_conv(x, w, b, d):
    batch, _, length = x.shape
    out_channels, in_channels, kernel = w.shape
    out_length = length - (kernel - 1) * d
    y = np.zeros((batch, out_channels, out_length))
    for n in range(batch):
        for o in range(out_channels):
            for t in range(out_length):
                acc = b[o]
                for c in range(in_channels):
                    for k in range(kernel):
                        acc += w[o, c, k] * x[n, c, t + k * d]
                y[n, o, t] = acc
    return y


def _zero_stuffed(w, d):
    out_channels, in_channels, kernel = w.shape
    stuffed = np.zeros((out_channels, in_channels, (kernel - 1) * d + 1))
    stuffed[:, :, ::d] = w
    return stuffed


def _check(f, analytic, x):
    numeric = numerical_gradient(f, x)
    assert relative_error(analytic, numeric) < TOLERANCE


@pytest.mark.parametrize("seed", range(100))
def test_dilated_conv_matches_zero_stuffed_kernel(seed):
    rng = np.random.default_rng(seed)
    kernel = int(rng.integers(1, 6))
    dilation = int(rng.integers(1, 5))
    length = (kernel - 1) * dilation + int(rng.integers(1, 20))
    x = rng.standard_normal((2, int(rng.integers(1, 4)), length))
    w = rng.standard_normal((int(rng.integers(1, 4)), x.shape[1], kernel))
    b = rng.standard_normal(w.shape[0])

    dilated = ops.conv1d_forward(x, w, b, dilation)
    plain = ops.conv1d_forward(x, _zero_stuffed(w, dilation), b, 1)

    assert np.max(np.abs(dilated - plain)) <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_conv_matches_direct_sum(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, 17))
    w = rng.standard_normal((4, 3, 3))
    b = rng.standard_normal(4)
    dilation = 1 + seed % 3

    np.testing.assert_allclose(ops.conv1d_forward(x, w, b, dilation), _brute_force_conv(x, w, b, dilation), atol=1e-12)


@pytest.mark.parametrize("seed", range(40))
def test_conv_gradients(seed):
    rng = np.random.default_rng(seed)
    kernel = int(rng.integers(1, 5))
    dilation = int(rng.integers(1, 4))
    x = rng.standard_normal((2, int(rng.integers(1, 3)), (kernel - 1) * dilation + int(rng.integers(1, 8))))
    w = rng.standard_normal((int(rng.integers(1, 3)), x.shape[1], kernel))
    b = rng.standard_normal(w.shape[0])
    upstream = rng.standard_normal(ops.conv1d_forward(x, w, b, dilation).shape)

    def f():
        return float(np.sum(ops.conv1d_forward(x, w, b, dilation) * upstream))

    grad_x, grad_w, grad_b = ops.conv1d_backward(upstream, x, w, dilation)
    _check(f, grad_x, x)
    _check(f, grad_w, w)
    _check(f, grad_b, b)


@pytest.mark.parametrize("seed", range(20))
def test_dense_gradients(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((3, int(rng.integers(1, 6))))
    w = rng.standard_normal((int(rng.integers(1, 4)), x.shape[1]))
    b = rng.standard_normal(w.shape[0])
    upstream = rng.standard_normal((3, w.shape[0]))

    def f():
        return float(np.sum(ops.dense_forward(x, w, b) * upstream))

    grad_x, grad_w, grad_b = ops.dense_backward(upstream, x, w)
    _check(f, grad_x, x)
    _check(f, grad_w, w)
    _check(f, grad_b, b)


@pytest.mark.parametrize("seed", range(10))
def test_selu_gradient(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, 7))
    # Keep clear of the kink at zero.
    x[np.abs(x) < 1e-2] = 0.5
    upstream = rng.standard_normal(x.shape)

    def f():
        return float(np.sum(ops.selu(x) * upstream))

    _check(f, ops.selu_backward(upstream, x), x)


@pytest.mark.parametrize("seed", range(10))
def test_maxpool_gradient(seed):
    rng = np.random.default_rng(seed)
    # Distinct values so no perturbation can flip a pair.
    x = 0.1 * rng.permutation(54).reshape(2, 3, 9).astype(np.float64)
    y, argmax = ops.maxpool_forward(x)
    upstream = rng.standard_normal(y.shape)

    def f():
        return float(np.sum(ops.maxpool_forward(x)[0] * upstream))

    _check(f, ops.maxpool_backward(upstream, argmax, x.shape[2]), x)


@pytest.mark.parametrize("seed", range(10))
def test_sigmoid_gradient(seed):
    rng = np.random.default_rng(seed)
    x = 3.0 * rng.standard_normal(8)
    upstream = rng.standard_normal(8)

    def f():
        return float(np.sum(ops.sigmoid(x) * upstream))

    _check(f, ops.sigmoid_backward(upstream, ops.sigmoid(x)), x)


@pytest.mark.parametrize("seed", range(10))
def test_hardtanh_gradient(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-10.0, 42.0, size=12)
    # Keep clear of the bounds.
    x[np.abs(x) < 1e-2] = 1.0
    x[np.abs(x - 32.0) < 1e-2] = 31.0
    upstream = rng.standard_normal(12)

    def f():
        return float(np.sum(ops.hardtanh_bounded(x, 0.0, 32.0) * upstream))

    _check(f, ops.hardtanh_bounded_backward(upstream, x, 0.0, 32.0), x)


def test_maxpool_drops_odd_tail_and_prefers_earlier_tie():
    x = np.array([[[1.0, 1.0, 3.0, 2.0, 9.0]]])
    y, argmax = ops.maxpool_forward(x)

    np.testing.assert_array_equal(y, [[[1.0, 3.0]]])
    np.testing.assert_array_equal(argmax, [[[0, 0]]])
    grad = ops.maxpool_backward(np.ones_like(y), argmax, 5)
    np.testing.assert_array_equal(grad, [[[1.0, 0.0, 1.0, 0.0, 0.0]]])


def test_hardtanh_clamps_to_bounds():
    np.testing.assert_array_equal(ops.hardtanh_bounded(np.array([-3.0, 4.0, 50.0]), 0.0, 32.0), [0.0, 4.0, 32.0])


def test_non_finite_output_names_the_operator():
    x = np.array([[np.inf, 1.0]])
    with pytest.raises(NumericalError) as exc_info:
        ops.dense_forward(x, np.ones((1, 2)), np.zeros(1))
    assert exc_info.value.code == "NON_FINITE"
    assert exc_info.value.operator == "dense_forward"
    assert exc_info.value.exit_code == 3


def test_conv_rejects_too_short_input():
    with pytest.raises(ValueError):
        ops.conv1d_forward(np.zeros((1, 1, 4)), np.zeros((1, 1, 3)), np.zeros(1), 2)


def test_selu_closed_forms():
    y = ops.selu(np.array([0.0, 1.0, -30.0]))

    assert y[0] == 0.0
    assert y[1] == pytest.approx(ops.SELU_LAMBDA, abs=1e-12)
    assert y[1] == pytest.approx(1.0507, abs=1e-4)
    assert y[2] == pytest.approx(-ops.SELU_LAMBDA * ops.SELU_ALPHA, abs=1e-9)
