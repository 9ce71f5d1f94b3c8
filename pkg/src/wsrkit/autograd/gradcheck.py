"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .engine import AutogradError, Tape, Tensor, backward, no_grad


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Compare the taped gradient of ``f`` at ``x`` against central differences.

    ``x`` must be float64 and ``f`` must return a scalar. Returns the worst
    relative error max_i |analytic_i - numeric_i| / (|analytic_i| + 1e-8).
    """
    if x.data.dtype != np.float64:
        raise AutogradError("finite_diff_check requires a float64 tensor")
    if not (1e-7 <= h <= 1e-3):
        raise AutogradError(f"step size {h} outside [1e-7, 1e-3]")

    probe = Tensor(x.data.copy(), requires_grad=True, dtype=np.float64)
    with Tape() as tape:
        out = f(probe)
    if out.size != 1:
        raise AutogradError(f"function under check must return a scalar, got shape {tuple(out.shape)}")
    backward(out, tape)
    analytic = probe.grad if probe.grad is not None else np.zeros_like(probe.data)

    numeric = np.zeros_like(probe.data)
    flat = probe.data.reshape(-1)
    nflat = numeric.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = float(f(probe).data)
            flat[i] = keep - h
            down = float(f(probe).data)
            flat[i] = keep
            nflat[i] = (up - down) / (2.0 * h)

    err = np.abs(analytic - numeric) / (np.abs(analytic) + 1e-8)
    return float(err.max()) if err.size else 0.0
