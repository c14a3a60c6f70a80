"""Stateful layer objects.

Each layer owns its parameters and trainable flag, caches forward activations
when asked to (train mode), and exposes an exact backward pass. Inference
forward calls never mutate the layer, so a model in infer mode is safely
shared across threads.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import ConfigError, UsageError
from .kernels import BatchNormState, ConvParams


class Layer:
    kind = "layer"

    def __init__(self, name: str):
        self.name = name
        self.trainable = True
        self._cache = None
        self.grads: dict[str, np.ndarray] = {}

    def params(self) -> dict[str, np.ndarray]:
        """Trainable parameter arrays, by name. Mutated in place by the optimizer."""
        return {}

    def state(self) -> dict[str, np.ndarray]:
        """Non-trainable state arrays (running statistics)."""
        return {}

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise UsageError(
                f"layer {self.name!r}: backward called without a cached train-mode forward")
        return self._cache

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class Conv2D(Layer):
    kind = "conv"

    def __init__(self, name: str, kernel: np.ndarray, stride: int = 1,
                 padding: str = "same"):
        super().__init__(name)
        self.kernel = kernel
        self.stride = stride
        self.padding = padding

    def params(self):
        return {"weight": self.kernel}

    def forward(self, x, train=False, rng=None):
        out, cache = kernels.conv2d_forward(
            x, ConvParams(self.kernel, self.stride, self.padding))
        self._cache = cache if train else None
        return out

    def backward(self, grad_out):
        grad_x, grad_k = kernels.conv2d_backward(self._take_cache(), grad_out)
        self.grads = {"weight": grad_k}
        return grad_x


class DepthwiseConv2D(Layer):
    kind = "depthwise"

    def __init__(self, name: str, kernel: np.ndarray, stride: int = 1,
                 padding: str = "same"):
        super().__init__(name)
        self.kernel = kernel
        self.stride = stride
        self.padding = padding

    def params(self):
        return {"weight": self.kernel}

    def forward(self, x, train=False, rng=None):
        out, cache = kernels.depthwise_conv2d_forward(
            x, ConvParams(self.kernel, self.stride, self.padding))
        self._cache = cache if train else None
        return out

    def backward(self, grad_out):
        grad_x, grad_k = kernels.depthwise_conv2d_backward(self._take_cache(), grad_out)
        self.grads = {"weight": grad_k}
        return grad_x


class BatchNorm(Layer):
    kind = "batchnorm"

    def __init__(self, name: str, bn: BatchNormState):
        super().__init__(name)
        self.bn = bn

    def params(self):
        return {"gamma": self.bn.gamma, "beta": self.bn.beta}

    def state(self):
        return {"running_mean": self.bn.running_mean,
                "running_var": self.bn.running_var}

    def forward(self, x, train=False, rng=None):
        # frozen layers keep using (and never update) their running statistics
        mode = "train" if (train and self.trainable) else "infer"
        out, cache = kernels.batchnorm_forward(x, self.bn, mode)
        self._cache = cache if train else None
        return out

    def backward(self, grad_out):
        grad_x, grad_gamma, grad_beta = kernels.batchnorm_backward(
            self._take_cache(), grad_out)
        self.grads = {"gamma": grad_gamma, "beta": grad_beta}
        return grad_x


class ReLU6(Layer):
    kind = "relu6"

    def forward(self, x, train=False, rng=None):
        out, cache = kernels.relu6_forward(x)
        self._cache = cache if train else None
        return out

    def backward(self, grad_out):
        self.grads = {}
        return kernels.relu6_backward(self._take_cache(), grad_out)


class GlobalAvgPool(Layer):
    kind = "avg_pool"

    def forward(self, x, train=False, rng=None):
        out, cache = kernels.global_avg_pool_forward(x)
        self._cache = cache if train else None
        return out

    def backward(self, grad_out):
        self.grads = {}
        return kernels.global_avg_pool_backward(self._take_cache(), grad_out)


class GlobalMaxPool(Layer):
    kind = "max_pool"

    def forward(self, x, train=False, rng=None):
        out, cache = kernels.global_max_pool_forward(x)
        self._cache = cache if train else None
        return out

    def backward(self, grad_out):
        self.grads = {}
        return kernels.global_max_pool_backward(self._take_cache(), grad_out)


class AvgConcatMaxPool(Layer):
    """Average and max pooling concatenated along channels: N,1,1,2C output."""

    kind = "avg_concat_max_pool"

    def forward(self, x, train=False, rng=None):
        avg, avg_cache = kernels.global_avg_pool_forward(x)
        mx, max_cache = kernels.global_max_pool_forward(x)
        self._cache = (avg_cache, max_cache) if train else None
        return np.concatenate([avg, mx], axis=3)

    def backward(self, grad_out):
        avg_cache, max_cache = self._take_cache()
        c = grad_out.shape[3] // 2
        self.grads = {}
        return (kernels.global_avg_pool_backward(avg_cache, grad_out[:, :, :, :c])
                + kernels.global_max_pool_backward(max_cache, grad_out[:, :, :, c:]))


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, name: str, rate: float):
        super().__init__(name)
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        mode = "train" if train else "infer"
        out, cache = kernels.dropout_forward(x, self.rate, mode, rng)
        self._cache = cache if train else None
        # a train-mode identity (rate 0) still needs a backward path
        if train and cache is None:
            self._cache = ()
        return out

    def backward(self, grad_out):
        cache = self._take_cache()
        self.grads = {}
        return kernels.dropout_backward(cache if cache != () else None, grad_out)


class Dense(Layer):
    kind = "dense"

    def __init__(self, name: str, weight: np.ndarray, bias: np.ndarray):
        super().__init__(name)
        self.weight = weight
        self.bias = bias

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x, train=False, rng=None):
        out, cache = kernels.dense_forward(x, self.weight, self.bias)
        self._cache = cache if train else None
        return out

    def backward(self, grad_out):
        grad_x, grad_w, grad_b = kernels.dense_backward(self._take_cache(), grad_out)
        self.grads = {"weight": grad_w, "bias": grad_b}
        return grad_x
