"""Shrinkage residual network over IQ frames.

The network is a chain of residual stacks, each halving the time axis:

    1x1 conv (channel projection) -> shrinkage unit -> shrinkage unit -> maxpool(2)

A shrinkage unit convolves the ReLU-activated input, derives a per-channel
threshold from the result, soft-thresholds it and adds the identity
shortcut. Small-magnitude activations are zeroed, which is what makes the
features robust on noisy inputs. The classifier head flattens the last
stack and applies one or two dense layers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .autograd import (
    Tensor,
    conv1d,
    gap,
    linear,
    maxpool1d,
    relu,
    reshape,
    sigmoid,
    soft_threshold as _soft_threshold,
    tabs,
)

soft_threshold = _soft_threshold


@dataclass(frozen=True)
class DrsnConfig:
    """Architecture hyperparameters; all tensor shapes derive from these."""

    num_classes: int
    input_len: int = 128
    num_stacks: int = 3
    channels: int = 32
    rsu_kernel: int = 3
    fc_hidden: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.input_len < 32 or self.input_len & (self.input_len - 1):
            raise ValueError("input_len must be a power of two >= 32")
        if self.num_stacks < 1:
            raise ValueError("num_stacks must be >= 1")
        if self.input_len >> self.num_stacks < 1:
            raise ValueError("too many stacks for this input length")
        if self.channels < 1:
            raise ValueError("channels must be positive")
        if self.rsu_kernel < 1 or self.rsu_kernel % 2 == 0:
            raise ValueError("rsu_kernel must be a positive odd integer")
        if self.fc_hidden < 0:
            raise ValueError("fc_hidden must be >= 0")

    @property
    def feature_len(self) -> int:
        """Time length after all stacks."""
        return self.input_len >> self.num_stacks

    @property
    def flat_features(self) -> int:
        return self.channels * self.feature_len

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "input_len": self.input_len,
            "num_stacks": self.num_stacks,
            "channels": self.channels,
            "rsu_kernel": self.rsu_kernel,
            "fc_hidden": self.fc_hidden,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "DrsnConfig":
        return cls(**{k: int(d[k]) for k in (
            "num_classes", "input_len", "num_stacks", "channels",
            "rsu_kernel", "fc_hidden", "seed")})


def param_shapes(config: DrsnConfig) -> dict[str, tuple[int, ...]]:
    """Ordered parameter name -> shape map for a config.

    Names are stable across runs and checkpoint round-trips.
    """
    ch, k = config.channels, config.rsu_kernel
    shapes: dict[str, tuple[int, ...]] = {}
    cin = 2
    for s in range(config.num_stacks):
        p = f"stack{s}"
        shapes[f"{p}.proj.w"] = (ch, cin, 1)
        shapes[f"{p}.proj.b"] = (ch,)
        for r in range(2):
            q = f"{p}.rsu{r}"
            shapes[f"{q}.conv.w"] = (ch, ch, k)
            shapes[f"{q}.conv.b"] = (ch,)
            shapes[f"{q}.shrink.fc1.w"] = (ch, ch)
            shapes[f"{q}.shrink.fc1.b"] = (ch,)
            shapes[f"{q}.shrink.fc2.w"] = (ch, ch)
            shapes[f"{q}.shrink.fc2.b"] = (ch,)
        cin = ch
    flat = config.flat_features
    if config.fc_hidden > 0:
        shapes["head.fc1.w"] = (config.fc_hidden, flat)
        shapes["head.fc1.b"] = (config.fc_hidden,)
        shapes["head.out.w"] = (config.num_classes, config.fc_hidden)
    else:
        shapes["head.out.w"] = (config.num_classes, flat)
    shapes["head.out.b"] = (config.num_classes,)
    return shapes


def expected_param_count(config: DrsnConfig) -> int:
    """Closed-form element count.

    With C channels, kernel k, S stacks, H = fc_hidden, F = flat features
    and N classes:

        stack s:  C*cin + C  (projection, cin = 2 for s=0 else C)
                + 2 * (C^2*(k + 2) + 3C)   (two units: conv + two dense layers)
        head:     H*F + H + N*H + N        (or N*F + N when H = 0)
    """
    ch, k, s = config.channels, config.rsu_kernel, config.num_stacks
    per_rsu = ch * ch * (k + 2) + 3 * ch
    total = (ch * 2 + ch) + 2 * per_rsu
    total += (s - 1) * ((ch * ch + ch) + 2 * per_rsu)
    flat = config.flat_features
    if config.fc_hidden > 0:
        total += config.fc_hidden * flat + config.fc_hidden
        total += config.num_classes * config.fc_hidden + config.num_classes
    else:
        total += config.num_classes * flat + config.num_classes
    return total


class DrsnModel:
    """A config plus its named parameter tensors."""

    def __init__(self, config: DrsnConfig, params: dict[str, Tensor]):
        self.config = config
        self.params = params

    @classmethod
    def init(cls, config: DrsnConfig, dtype=np.float32) -> "DrsnModel":
        """Seeded init: weights uniform on +-1/sqrt(fan_in), biases zero.

        Parameters are drawn in the order of :func:`param_shapes`, so the
        same seed always yields the same model.
        """
        rng = np.random.default_rng(np.random.SeedSequence(config.seed % 2**64))
        params: dict[str, Tensor] = {}
        for name, shape in param_shapes(config).items():
            if name.endswith(".b"):
                data = np.zeros(shape, dtype=dtype)
            else:
                fan_in = int(np.prod(shape[1:]))
                bound = 1.0 / np.sqrt(fan_in)
                data = rng.uniform(-bound, bound, size=shape).astype(dtype)
            params[name] = Tensor(data, requires_grad=True)
        return cls(config, params)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {name: p.grad for name, p in self.params.items() if p.grad is not None}


def param_count(model: DrsnModel) -> int:
    return sum(p.size for p in model.params.values())


def shrinkage_block(x: Tensor, fc1_w: Tensor, fc1_b: Tensor,
                    fc2_w: Tensor, fc2_b: Tensor) -> Tensor:
    """Per-channel threshold tau for a B x C x L feature map.

    a_c is the channel's mean absolute activation; a two-layer dense net
    squashed through a sigmoid scales it into (0, a_c), so the threshold
    can never wipe a channel out entirely.
    """
    a = gap(tabs(x))                       # B x C, mean |x| per channel
    z = linear(relu(linear(a, fc1_w, fc1_b)), fc2_w, fc2_b)
    alpha = sigmoid(z)
    return alpha * a


def rsu_forward(x: Tensor, conv_w: Tensor, conv_b: Tensor,
                fc1_w: Tensor, fc1_b: Tensor, fc2_w: Tensor, fc2_b: Tensor) -> Tensor:
    """One shrinkage unit: x + soft_threshold(conv(relu(x)), tau).

    Shape-preserving; with all conv parameters zero it is the identity.
    """
    r = conv1d(relu(x), conv_w, conv_b, padding="same")
    tau = shrinkage_block(r, fc1_w, fc1_b, fc2_w, fc2_b)
    return x + soft_threshold(r, tau)


def residual_stack(x: Tensor, params: Mapping[str, Tensor], prefix: str) -> Tensor:
    """Projection conv, two shrinkage units, then a width-2 max pool."""
    h = conv1d(x, params[f"{prefix}.proj.w"], params[f"{prefix}.proj.b"], padding="same")
    for r in range(2):
        q = f"{prefix}.rsu{r}"
        h = rsu_forward(
            h,
            params[f"{q}.conv.w"], params[f"{q}.conv.b"],
            params[f"{q}.shrink.fc1.w"], params[f"{q}.shrink.fc1.b"],
            params[f"{q}.shrink.fc2.w"], params[f"{q}.shrink.fc2.b"],
        )
    return maxpool1d(h)


def drsn_forward(model: DrsnModel, batch: Tensor) -> Tensor:
    """Logits for a B x 2 x input_len batch. Softmax happens in the loss."""
    cfg = model.config
    if batch.data.ndim != 3 or batch.data.shape[1] != 2:
        raise ValueError(f"expected a B x 2 x L batch, got {batch.data.shape}")
    if batch.data.shape[2] != cfg.input_len:
        raise ValueError(
            f"input length {batch.data.shape[2]} does not match the model's {cfg.input_len}")
    h = batch
    for s in range(cfg.num_stacks):
        h = residual_stack(h, model.params, f"stack{s}")
    h = reshape(h, (h.data.shape[0], cfg.flat_features))
    if cfg.fc_hidden > 0:
        h = relu(linear(h, model.params["head.fc1.w"], model.params["head.fc1.b"]))
    return linear(h, model.params["head.out.w"], model.params["head.out.b"])
