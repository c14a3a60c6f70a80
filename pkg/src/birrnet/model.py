"""Depthwise-separable CNN: backbone plus configurable classification head.

The backbone is the classic 28-layer stack: a 3x3 stride-2 stem convolution,
then 13 depthwise-separable blocks (3x3 depthwise + 1x1 pointwise, each conv
followed by batch norm and ReLU6) with the canonical channel/stride schedule
ending at 1024 * alpha channels. Five stride-2 stages give a spatial output
of resolution / 32. The head is pooling -> dropout -> dense -> softmax.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .kernels import BatchNormState, he_uniform, softmax
from .layers import (AvgConcatMaxPool, BatchNorm, Conv2D, Dense, DepthwiseConv2D,
                     Dropout, GlobalAvgPool, GlobalMaxPool, Layer, ReLU6)

HEAD_POOLINGS = ("avg", "max", "avg_concat_max")

_STEM_CHANNELS = 32
# (depthwise stride, pointwise output channels); the final block keeps stride 1
# so the net has exactly five stride-2 stages and a res/32 output size.
_BLOCKS = (
    (1, 64),
    (2, 128),
    (1, 128),
    (2, 256),
    (1, 256),
    (2, 512),
    (1, 512),
    (1, 512),
    (1, 512),
    (1, 512),
    (1, 512),
    (2, 1024),
    (1, 1024),
)

BN_MOMENTUM = 0.01
BN_EPSILON = 1e-3


@dataclass(frozen=True)
class ModelConfig:
    width_multiplier: float = 1.0
    input_resolution: int = 224
    num_classes: int = 6
    head_pooling: str = "avg"
    dropout_rate: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.width_multiplier <= 1.0:
            raise ConfigError(
                f"width_multiplier must be in (0, 1], got {self.width_multiplier}")
        if self.input_resolution < 32 or self.input_resolution % 32 != 0:
            raise ConfigError(
                "input_resolution must be a positive multiple of 32 so the five "
                f"stride-2 stages land on an integer size, got {self.input_resolution}")
        if self.num_classes < 1:
            raise ConfigError(f"num_classes must be >= 1, got {self.num_classes}")
        if self.head_pooling not in HEAD_POOLINGS:
            raise ConfigError(
                f"head_pooling must be one of {HEAD_POOLINGS}, got {self.head_pooling!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


def scaled_channels(base: int, alpha: float) -> int:
    """Width-multiplied channel count, rounded half-up, minimum 1."""
    return max(1, int(math.floor(base * alpha + 0.5)))


@dataclass
class Model:
    layers: list[Layer]
    config: ModelConfig
    head_start: int  # index of the first head layer

    def forward(self, batch: np.ndarray, train: bool = False, rng=None):
        """Run the full network. Returns (logits, probabilities)."""
        res = self.config.input_resolution
        if batch.ndim != 4 or batch.shape[1] != res or batch.shape[2] != res \
                or batch.shape[3] != 3:
            raise DimensionError(
                f"batch must be Nx{res}x{res}x3, got {getattr(batch, 'shape', None)}")
        x = batch
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x, softmax(x)

    def backbone_forward(self, batch: np.ndarray) -> np.ndarray:
        x = batch
        for layer in self.layers[:self.head_start]:
            x = layer.forward(x, train=False)
        return x

    def named_tensors(self):
        """Yield (name, array, layer) for every parameter and state tensor,
        in a fixed, load-compatible order."""
        for layer in self.layers:
            for pname, arr in layer.params().items():
                yield f"{layer.name}/{pname}", arr, layer
            for sname, arr in layer.state().items():
                yield f"{layer.name}/{sname}", arr, layer

    def param_count(self) -> int:
        """Total number of trainable parameter scalars."""
        return sum(arr.size for layer in self.layers
                   for arr in layer.params().values())

    def trainable_params(self) -> dict[tuple[int, str], np.ndarray]:
        return {(i, name): arr
                for i, layer in enumerate(self.layers) if layer.trainable
                for name, arr in layer.params().items()}

    def astype(self, dtype) -> "Model":
        """Deep copy with all parameter/state arrays cast to ``dtype``."""
        clone = copy.deepcopy(self)
        for layer in clone.layers:
            for holder in ("kernel", "weight", "bias"):
                if hasattr(layer, holder):
                    setattr(layer, holder, getattr(layer, holder).astype(dtype))
            if hasattr(layer, "bn"):
                bn = layer.bn
                bn.gamma = bn.gamma.astype(dtype)
                bn.beta = bn.beta.astype(dtype)
                bn.running_mean = bn.running_mean.astype(dtype)
                bn.running_var = bn.running_var.astype(dtype)
        return clone


def _conv_bn_relu(layers: list[Layer], name: str, kernel: np.ndarray, stride: int,
                  depthwise: bool = False):
    if depthwise:
        layers.append(DepthwiseConv2D(name, kernel, stride=stride, padding="same"))
        channels = kernel.shape[2]
    else:
        layers.append(Conv2D(name, kernel, stride=stride, padding="same"))
        channels = kernel.shape[3]
    layers.append(BatchNorm(f"{name}_bn", BatchNormState.identity(
        channels, momentum=BN_MOMENTUM, epsilon=BN_EPSILON)))
    layers.append(ReLU6(f"{name}_relu"))


def build_model(config: ModelConfig, rng: np.random.Generator) -> Model:
    """Construct the network with fan-in-scaled uniform weight init.

    Batch norm starts at gamma=1, beta=0, running mean 0, running variance 1.
    Every layer starts trainable. The same seed yields bitwise-identical
    weights.
    """
    alpha = config.width_multiplier
    layers: list[Layer] = []

    c_in = 3
    c_out = scaled_channels(_STEM_CHANNELS, alpha)
    stem = he_uniform(rng, (3, 3, c_in, c_out), fan_in=3 * 3 * c_in)
    _conv_bn_relu(layers, "conv1", stem, stride=2)
    c_in = c_out

    for i, (stride, base_out) in enumerate(_BLOCKS, start=1):
        c_out = scaled_channels(base_out, alpha)
        dw = he_uniform(rng, (3, 3, c_in, 1), fan_in=3 * 3)
        _conv_bn_relu(layers, f"block{i:02d}_dw", dw, stride=stride, depthwise=True)
        pw = he_uniform(rng, (1, 1, c_in, c_out), fan_in=c_in)
        _conv_bn_relu(layers, f"block{i:02d}_pw", pw, stride=1)
        c_in = c_out

    head_start = len(layers)
    if config.head_pooling == "avg":
        layers.append(GlobalAvgPool("head_pool"))
        dense_in = c_in
    elif config.head_pooling == "max":
        layers.append(GlobalMaxPool("head_pool"))
        dense_in = c_in
    else:
        layers.append(AvgConcatMaxPool("head_pool"))
        dense_in = 2 * c_in
    layers.append(Dropout("head_dropout", config.dropout_rate))
    layers.append(Dense(
        "head_dense",
        he_uniform(rng, (dense_in, config.num_classes), fan_in=dense_in),
        np.zeros(config.num_classes, dtype=np.float32),
    ))

    return Model(layers=layers, config=config, head_start=head_start)


def set_trainable(model: Model, policy) -> Model:
    """Apply a freeze policy: "freeze_backbone", "unfreeze_all", or an
    explicit per-layer boolean mask. Frozen batch-norm layers also stop
    updating their running statistics."""
    if policy == "freeze_backbone":
        for i, layer in enumerate(model.layers):
            layer.trainable = i >= model.head_start
    elif policy == "unfreeze_all":
        for layer in model.layers:
            layer.trainable = True
    elif isinstance(policy, (list, tuple)):
        if len(policy) != len(model.layers):
            raise ConfigError(
                f"trainable mask has {len(policy)} entries for "
                f"{len(model.layers)} layers")
        for layer, flag in zip(model.layers, policy):
            layer.trainable = bool(flag)
    else:
        raise ConfigError(f"unknown trainable policy {policy!r}")
    return model
