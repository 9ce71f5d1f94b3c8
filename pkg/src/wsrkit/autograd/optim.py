"""Adam optimizer with first-step bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import AutogradError, Tensor


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place.

    ``grads`` maps parameter names to gradient arrays of matching shape;
    moment buffers are created lazily on the first step.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise AutogradError(f"missing gradient for parameter {name!r}")
        if g.shape != p.data.shape:
            raise AutogradError(
                f"gradient shape {g.shape} does not match parameter {name!r} shape {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            state.m[name] = m
            state.v[name] = np.zeros_like(p.data)
        elif m.shape != p.data.shape:
            raise AutogradError(f"optimizer state for {name!r} has drifted to shape {m.shape}")
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)
