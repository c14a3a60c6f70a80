"""Numeric kernels for rank-4 NHWC tensors.

Tensors are plain numpy arrays of shape (batch, height, width, channels),
row-major, float32 in production. Every kernel preserves the input dtype, so
the same code paths run in float64 for gradient checking.

Forward kernels return ``(output, cache)``; the matching ``*_backward``
consumes ``(cache, grad_out)`` and returns exact analytic gradients. Kernels
are pure functions except for ``batchnorm_forward`` in train mode, which
updates the running statistics of the state it is given (single writer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConfigError, DimensionError, StateError

Padding = Literal["same", "valid"]


@dataclass(frozen=True)
class ConvParams:
    """Convolution kernel plus stride and padding rule.

    Kernel shape is (kh, kw, in_ch, out_ch) for a standard convolution and
    (kh, kw, ch, 1) for a depthwise one.
    """

    kernel: np.ndarray
    stride: int = 1
    padding: Padding = "same"

    def __post_init__(self):
        if not isinstance(self.kernel, np.ndarray) or self.kernel.ndim != 4:
            raise DimensionError(
                f"convolution kernel must be a rank-4 array, got "
                f"{getattr(self.kernel, 'shape', type(self.kernel))}"
            )
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.padding not in ("same", "valid"):
            raise ConfigError(f"padding must be 'same' or 'valid', got {self.padding!r}")


@dataclass
class BatchNormState:
    """Per-channel affine parameters and running statistics."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.01
    epsilon: float = 1e-3

    @classmethod
    def identity(cls, channels: int, momentum: float = 0.01, epsilon: float = 1e-3,
                 dtype=np.float32) -> "BatchNormState":
        """gamma=1, beta=0, running mean 0, running variance 1."""
        return cls(
            gamma=np.ones(channels, dtype=dtype),
            beta=np.zeros(channels, dtype=dtype),
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
            momentum=momentum,
            epsilon=epsilon,
        )


def require_tensor(x, what: str = "input") -> np.ndarray:
    if not isinstance(x, np.ndarray) or x.ndim != 4:
        raise DimensionError(
            f"{what} must be a rank-4 NHWC array, got "
            f"{getattr(x, 'shape', type(x))}"
        )
    return x


# ---------------------------------------------------------------------------
# padding / windowing helpers
# ---------------------------------------------------------------------------

def conv_output_size(size: int, k: int, stride: int, padding: Padding) -> int:
    if padding == "same":
        return -(-size // stride)  # ceil(size / stride)
    return (size - k) // stride + 1


def _same_pads(size: int, k: int, stride: int) -> tuple[int, int]:
    # asymmetric total padding splits as (floor(p/2) before, rest after)
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def _pad_input(x: np.ndarray, kh: int, kw: int, stride: int, padding: Padding) -> np.ndarray:
    _, h, w, _ = x.shape
    if padding == "valid":
        if h < kh or w < kw:
            raise DimensionError(
                f"kernel {kh}x{kw} exceeds input {h}x{w} with 'valid' padding"
            )
        return x
    pt, pb = _same_pads(h, kh, stride)
    pl, pr = _same_pads(w, kw, stride)
    if pt == pb == pl == pr == 0:
        return x
    return np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))


def _window_view(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Read-only strided view (N, OH, OW, kh, kw, C) over a padded input."""
    n, h, w, c = xp.shape
    oh = (h - kh) // stride + 1
    ow = (w - kw) // stride + 1
    sn, sh, sw, sc = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, oh, ow, kh, kw, c),
        strides=(sn, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )


def _scatter_windows(dview: np.ndarray, x_shape, xp_shape, stride: int) -> np.ndarray:
    """Adjoint of windowing: accumulate window gradients back onto the input."""
    dxp = np.zeros(xp_shape, dtype=dview.dtype)
    _, oh, ow, kh, kw, _ = dview.shape
    for i in range(kh):
        for j in range(kw):
            dxp[:, i:i + oh * stride:stride, j:j + ow * stride:stride, :] += \
                dview[:, :, :, i, j, :]
    pt = (xp_shape[1] - x_shape[1]) // 2
    pl = (xp_shape[2] - x_shape[2]) // 2
    return dxp[:, pt:pt + x_shape[1], pl:pl + x_shape[2], :]


# ---------------------------------------------------------------------------
# convolutions
# ---------------------------------------------------------------------------

def conv2d_forward(x: np.ndarray, params: ConvParams):
    """Standard 2-D convolution over NHWC input, im2col + matmul."""
    require_tensor(x)
    kh, kw, cin, cout = params.kernel.shape
    if x.shape[3] != cin:
        raise DimensionError(
            f"input channels do not match kernel: input {x.shape}, "
            f"kernel {params.kernel.shape}"
        )
    xp = _pad_input(x, kh, kw, params.stride, params.padding)
    view = _window_view(xp, kh, kw, params.stride)
    n, oh, ow = view.shape[:3]
    cols = view.reshape(n * oh * ow, kh * kw * cin)
    w2 = params.kernel.reshape(kh * kw * cin, cout)
    out = (cols @ w2).reshape(n, oh, ow, cout)
    cache = (cols, x.shape, xp.shape, params)
    return out, cache


def conv2d_backward(cache, grad_out: np.ndarray):
    """Returns (grad_input, grad_kernel)."""
    cols, x_shape, xp_shape, params = cache
    kh, kw, cin, cout = params.kernel.shape
    require_tensor(grad_out, "grad_out")
    n, oh, ow, _ = grad_out.shape
    g2 = grad_out.reshape(n * oh * ow, cout)
    grad_kernel = (cols.T @ g2).reshape(params.kernel.shape)
    dcols = g2 @ params.kernel.reshape(kh * kw * cin, cout).T
    dview = dcols.reshape(n, oh, ow, kh, kw, cin)
    grad_x = _scatter_windows(dview, x_shape, xp_shape, params.stride)
    return grad_x, grad_kernel


def conv2d(x: np.ndarray, params: ConvParams) -> np.ndarray:
    out, _ = conv2d_forward(x, params)
    return out


def depthwise_conv2d_forward(x: np.ndarray, params: ConvParams):
    """Per-channel spatial convolution: output channel c reads only input channel c."""
    require_tensor(x)
    kh, kw, c, mult = params.kernel.shape
    if mult != 1:
        raise DimensionError(
            f"depthwise kernel must have shape (kh, kw, ch, 1), got {params.kernel.shape}"
        )
    if x.shape[3] != c:
        raise DimensionError(
            f"input channels do not match depthwise kernel: input {x.shape}, "
            f"kernel {params.kernel.shape}"
        )
    xp = _pad_input(x, kh, kw, params.stride, params.padding)
    view = _window_view(xp, kh, kw, params.stride)
    out = np.einsum("nhwijc,ijc->nhwc", view, params.kernel[:, :, :, 0], optimize=True)
    cache = (xp, x.shape, params)
    return out, cache


def depthwise_conv2d_backward(cache, grad_out: np.ndarray):
    """Returns (grad_input, grad_kernel)."""
    xp, x_shape, params = cache
    kh, kw, c, _ = params.kernel.shape
    require_tensor(grad_out, "grad_out")
    view = _window_view(xp, kh, kw, params.stride)
    grad_kernel = np.einsum("nhwijc,nhwc->ijc", view, grad_out, optimize=True)
    k3 = params.kernel[:, :, :, 0]
    dview = grad_out[:, :, :, None, None, :] * k3[None, None, None, :, :, :]
    grad_x = _scatter_windows(dview, x_shape, xp.shape, params.stride)
    return grad_x, grad_kernel[:, :, :, None]


def depthwise_conv2d(x: np.ndarray, params: ConvParams) -> np.ndarray:
    out, _ = depthwise_conv2d_forward(x, params)
    return out


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------

def batchnorm_forward(x: np.ndarray, state: BatchNormState, mode: str):
    """Normalize per channel.

    Train mode uses batch statistics over (N, H, W) with biased variance and
    updates the running statistics in place as
    ``running <- (1 - momentum) * running + momentum * batch``.
    Infer mode uses the running statistics and leaves the state untouched.
    """
    require_tensor(x)
    c = x.shape[3]
    for name in ("gamma", "beta", "running_mean", "running_var"):
        vec = getattr(state, name)
        if vec.shape != (c,):
            raise DimensionError(
                f"batchnorm {name} has shape {vec.shape}, input has {c} channels"
            )
    if np.any(state.running_var <= 0):
        raise StateError("batchnorm running variance must stay positive")
    if mode not in ("train", "infer"):
        raise ConfigError(f"batchnorm mode must be 'train' or 'infer', got {mode!r}")

    if mode == "train":
        mean = x.mean(axis=(0, 1, 2))
        var = x.var(axis=(0, 1, 2))
        m = state.momentum
        state.running_mean = ((1.0 - m) * state.running_mean + m * mean).astype(
            state.running_mean.dtype)
        state.running_var = ((1.0 - m) * state.running_var + m * var).astype(
            state.running_var.dtype)
    else:
        mean = state.running_mean
        var = state.running_var

    inv_std = 1.0 / np.sqrt(var + state.epsilon)
    inv_std = inv_std.astype(x.dtype, copy=False)
    x_hat = (x - mean.astype(x.dtype, copy=False)) * inv_std
    out = state.gamma.astype(x.dtype, copy=False) * x_hat + state.beta.astype(x.dtype, copy=False)
    cache = (x_hat, inv_std, state.gamma, mode)
    return out, cache


def batchnorm_backward(cache, grad_out: np.ndarray):
    """Returns (grad_input, grad_gamma, grad_beta)."""
    x_hat, inv_std, gamma, mode = cache
    require_tensor(grad_out, "grad_out")
    axes = (0, 1, 2)
    grad_gamma = (grad_out * x_hat).sum(axis=axes)
    grad_beta = grad_out.sum(axis=axes)
    g = gamma.astype(grad_out.dtype, copy=False)
    if mode == "infer":
        # running stats are constants: straight chain rule
        grad_x = grad_out * g * inv_std
    else:
        # batch stats depend on x
        dxhat = grad_out * g
        grad_x = inv_std * (
            dxhat
            - dxhat.mean(axis=axes, keepdims=True)
            - x_hat * (dxhat * x_hat).mean(axis=axes, keepdims=True)
        )
    return grad_x, grad_gamma, grad_beta


def batchnorm(x: np.ndarray, state: BatchNormState, mode: str) -> np.ndarray:
    out, _ = batchnorm_forward(x, state, mode)
    return out


# ---------------------------------------------------------------------------
# activations and pooling
# ---------------------------------------------------------------------------

def relu6_forward(x: np.ndarray):
    require_tensor(x)
    out = np.minimum(np.maximum(x, 0), 6)
    return out, x


def relu6_backward(cache, grad_out: np.ndarray) -> np.ndarray:
    x = cache
    return grad_out * ((x > 0) & (x < 6))


def relu6(x: np.ndarray) -> np.ndarray:
    out, _ = relu6_forward(x)
    return out


def global_avg_pool_forward(x: np.ndarray):
    require_tensor(x)
    out = x.mean(axis=(1, 2), keepdims=True)
    return out, x.shape


def global_avg_pool_backward(cache, grad_out: np.ndarray) -> np.ndarray:
    shape = cache
    _, h, w, _ = shape
    return np.broadcast_to(grad_out / (h * w), shape).astype(grad_out.dtype, copy=True)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    out, _ = global_avg_pool_forward(x)
    return out


def global_max_pool_forward(x: np.ndarray):
    require_tensor(x)
    n, h, w, c = x.shape
    flat = x.reshape(n, h * w, c)
    idx = flat.argmax(axis=1)  # first maximum wins: deterministic tie-break
    out = np.take_along_axis(flat, idx[:, None, :], axis=1).reshape(n, 1, 1, c)
    return out, (idx, x.shape)


def global_max_pool_backward(cache, grad_out: np.ndarray) -> np.ndarray:
    idx, shape = cache
    n, h, w, c = shape
    dflat = np.zeros((n, h * w, c), dtype=grad_out.dtype)
    np.put_along_axis(dflat, idx[:, None, :], grad_out.reshape(n, 1, c), axis=1)
    return dflat.reshape(shape)


def global_max_pool(x: np.ndarray) -> np.ndarray:
    out, _ = global_max_pool_forward(x)
    return out


# ---------------------------------------------------------------------------
# dense / softmax / dropout
# ---------------------------------------------------------------------------

def dense_forward(x: np.ndarray, weights: np.ndarray, bias: np.ndarray):
    require_tensor(x)
    n, h, w, cin = x.shape
    if (h, w) != (1, 1):
        raise DimensionError(f"dense expects Nx1x1xC input, got {x.shape}")
    if weights.ndim != 2 or weights.shape[0] != cin:
        raise DimensionError(
            f"dense weights {weights.shape} do not match input {x.shape}")
    cout = weights.shape[1]
    if bias.shape != (cout,):
        raise DimensionError(f"dense bias {bias.shape} does not match weights {weights.shape}")
    xr = x.reshape(n, cin)
    out = (xr @ weights + bias).reshape(n, 1, 1, cout)
    return out, (xr, weights)


def dense_backward(cache, grad_out: np.ndarray):
    """Returns (grad_input, grad_weights, grad_bias)."""
    xr, weights = cache
    require_tensor(grad_out, "grad_out")
    n = xr.shape[0]
    cout = weights.shape[1]
    gr = grad_out.reshape(n, cout)
    grad_w = xr.T @ gr
    grad_b = gr.sum(axis=0)
    grad_x = (gr @ weights.T).reshape(n, 1, 1, weights.shape[0])
    return grad_x, grad_w, grad_b


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    out, _ = dense_forward(x, weights, bias)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the channel axis, max-shifted for stability."""
    require_tensor(logits, "logits")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return probs * (grad_out - (grad_out * probs).sum(axis=-1, keepdims=True))


def dropout_forward(x: np.ndarray, rate: float, mode: str, rng=None):
    """Inverted dropout: train mode zeroes with probability ``rate`` and
    scales survivors by 1/(1-rate); infer mode is the identity."""
    require_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "infer"):
        raise ConfigError(f"dropout mode must be 'train' or 'infer', got {mode!r}")
    if mode == "infer" or rate == 0.0:
        return x, None
    if rng is None:
        raise ConfigError("dropout in train mode requires an rng")
    keep = rng.random(x.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    out = x * keep * np.asarray(scale, dtype=x.dtype)
    return out, (keep, scale)


def dropout_backward(cache, grad_out: np.ndarray) -> np.ndarray:
    if cache is None:
        return grad_out
    keep, scale = cache
    return grad_out * keep * np.asarray(scale, dtype=grad_out.dtype)


def dropout(x: np.ndarray, rate: float, mode: str, rng=None) -> np.ndarray:
    out, _ = dropout_forward(x, rate, mode, rng)
    return out


def he_uniform(rng, shape: tuple[int, ...], fan_in: int, dtype=np.float32) -> np.ndarray:
    """Fan-in-scaled uniform initialization: U[-sqrt(6/fan_in), +sqrt(6/fan_in)]."""
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)
