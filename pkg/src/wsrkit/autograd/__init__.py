"""Minimal reverse-mode autodiff engine sized for small 1-D conv networks."""

from .engine import (
    AutogradError,
    Tape,
    Tensor,
    add,
    assert_finite,
    backward,
    mul,
    neg,
    no_grad,
    record,
    relu,
    reshape,
    sigmoid,
    square,
    sub,
    tabs,
    tmean,
    tsum,
)
from .gradcheck import finite_diff_check
from .nnops import (
    conv1d,
    gap,
    linear,
    maxpool1d,
    softmax,
    softmax_cross_entropy,
    soft_threshold,
)
from .optim import AdamState, adam_step

__all__ = [
    "AutogradError",
    "AdamState",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "assert_finite",
    "backward",
    "conv1d",
    "finite_diff_check",
    "gap",
    "linear",
    "maxpool1d",
    "mul",
    "neg",
    "no_grad",
    "record",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "softmax_cross_entropy",
    "soft_threshold",
    "square",
    "sub",
    "tabs",
    "tmean",
    "tsum",
]
