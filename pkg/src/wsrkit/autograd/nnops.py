"""Network-level differentiable operations on (batch, channel, time) tensors."""

from __future__ import annotations

import numpy as np

from .engine import AutogradError, Tensor, record


def conv1d(x: Tensor, weight: Tensor, bias: Tensor, padding: str = "same") -> Tensor:
    """Cross-correlate a B x Cin x L input with Cout x Cin x k filters.

    ``same`` padding keeps the output length equal to L and requires an odd
    kernel; ``valid`` yields L - k + 1. Differentiable in x, weight and bias.
    """
    if x.data.ndim != 3 or weight.data.ndim != 3:
        raise AutogradError(
            f"conv1d expects 3-d input and weight, got {x.data.shape} and {weight.data.shape}")
    b, cin, length = x.data.shape
    cout, wcin, k = weight.data.shape
    if wcin != cin:
        raise AutogradError(f"conv1d channel mismatch: input has {cin}, weight expects {wcin}")
    if bias.data.shape != (cout,):
        raise AutogradError(f"conv1d bias shape {bias.data.shape} != ({cout},)")
    if padding == "same":
        if k % 2 == 0:
            raise AutogradError("same-padding conv1d requires an odd kernel width")
        pad = (k - 1) // 2
    elif padding == "valid":
        pad = 0
    else:
        raise AutogradError(f"unknown padding mode {padding!r}")
    if k > length + 2 * pad:
        raise AutogradError(f"kernel width {k} exceeds padded length {length + 2 * pad}")

    if pad:
        xp = np.zeros((b, cin, length + 2 * pad), dtype=x.data.dtype)
        xp[:, :, pad:pad + length] = x.data
    else:
        xp = x.data
    out_len = xp.shape[2] - k + 1

    # windows: B x Cin x L' x k view, one big einsum does the whole conv
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)
    y = np.einsum("bclk,ock->bol", windows, weight.data, optimize=True)
    y += bias.data[None, :, None]
    out = Tensor(np.ascontiguousarray(y))

    def bwd(g):
        gw = np.einsum("bol,bclk->ock", g, windows, optimize=True)
        gb = g.sum(axis=(0, 2))
        # input gradient is the full correlation of g with the flipped kernel
        gpad = np.zeros((b, cout, out_len + 2 * (k - 1)), dtype=g.dtype)
        gpad[:, :, k - 1:k - 1 + out_len] = g
        gwin = np.lib.stride_tricks.sliding_window_view(gpad, k, axis=2)
        gxp = np.einsum("bolk,ock->bcl", gwin, weight.data[:, :, ::-1], optimize=True)
        gx = gxp[:, :, pad:pad + length] if pad else gxp
        return np.ascontiguousarray(gx), gw, gb

    return record(out, (x, weight, bias), bwd)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map: out = x @ weight.T + bias for B x n input and m x n weight."""
    if x.data.ndim != 2 or weight.data.ndim != 2:
        raise AutogradError(
            f"linear expects 2-d input and weight, got {x.data.shape} and {weight.data.shape}")
    if x.data.shape[1] != weight.data.shape[1]:
        raise AutogradError(
            f"linear dimension mismatch: input width {x.data.shape[1]}, weight width {weight.data.shape[1]}")
    if bias.data.shape != (weight.data.shape[0],):
        raise AutogradError(f"linear bias shape {bias.data.shape} != ({weight.data.shape[0]},)")
    out = Tensor(x.data @ weight.data.T + bias.data)

    def bwd(g):
        return g @ weight.data, g.T @ x.data, g.sum(axis=0)

    return record(out, (x, weight, bias), bwd)


def maxpool1d(x: Tensor) -> Tensor:
    """Width-2, stride-2 max pool over the time axis.

    An odd trailing sample is dropped. The gradient flows to the argmax of
    each window; on ties, the earlier sample wins.
    """
    if x.data.ndim != 3:
        raise AutogradError(f"maxpool1d expects a 3-d tensor, got {x.data.shape}")
    b, c, length = x.data.shape
    if length < 2:
        raise AutogradError("maxpool1d needs at least 2 time samples")
    out_len = length // 2
    pairs = x.data[:, :, :2 * out_len].reshape(b, c, out_len, 2)
    take_second = pairs[:, :, :, 1] > pairs[:, :, :, 0]  # strict: ties keep index 0
    out = Tensor(np.where(take_second, pairs[:, :, :, 1], pairs[:, :, :, 0]))

    def bwd(g):
        gpairs = np.zeros((b, c, out_len, 2), dtype=x.data.dtype)
        gpairs[:, :, :, 0] = np.where(take_second, 0, g)
        gpairs[:, :, :, 1] = np.where(take_second, g, 0)
        gx = np.zeros_like(x.data)
        gx[:, :, :2 * out_len] = gpairs.reshape(b, c, 2 * out_len)
        return (gx,)

    return record(out, (x,), bwd)


def gap(x: Tensor) -> Tensor:
    """Per-channel mean over the time axis: B x C x L -> B x C.

    Values are sorted before summing so the result does not depend on the
    time order of the samples.
    """
    if x.data.ndim != 3:
        raise AutogradError(f"gap expects a 3-d tensor, got {x.data.shape}")
    b, c, length = x.data.shape
    if length < 1:
        raise AutogradError("gap over an empty time axis")
    ordered = np.ascontiguousarray(np.sort(x.data, axis=2))
    out = Tensor(ordered.sum(axis=2) / length)

    def bwd(g):
        return ((g[:, :, None] / length) * np.ones_like(x.data),)

    return record(out, (x,), bwd)


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax of B x C logits, stabilized by max subtraction."""
    if logits.data.ndim != 2:
        raise AutogradError(f"softmax expects a 2-d tensor, got {logits.data.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    out = Tensor(p)

    def bwd(g):
        dot = (g * p).sum(axis=1, keepdims=True)
        return (p * (g - dot),)

    return record(out, (logits,), bwd)


def softmax_cross_entropy(logits: Tensor, targets: Tensor) -> Tensor:
    """Mean over the batch of -sum_c t_c * log softmax(z)_c.

    Target rows must lie on the probability simplex; only the logits carry
    gradient.
    """
    if logits.data.ndim != 2 or logits.data.shape[1] < 2:
        raise AutogradError(f"cross entropy needs B x C logits with C >= 2, got {logits.data.shape}")
    if targets.data.shape != logits.data.shape:
        raise AutogradError(
            f"target shape {targets.data.shape} != logits shape {logits.data.shape}")
    if not np.all(np.isfinite(logits.data)):
        raise AutogradError("non-finite logits in cross entropy")
    t = targets.data
    if np.any(t < -1e-6) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-6):
        raise AutogradError("cross-entropy targets must be simplex rows (nonnegative, summing to 1)")

    bsz = logits.data.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    out = Tensor(-(t * logp).sum() / bsz)

    def bwd(g):
        p = np.exp(logp)
        return (g * (p - t) / bsz, None)

    return record(out, (logits, targets), bwd)


def soft_threshold(x: Tensor, tau: Tensor) -> Tensor:
    """Channel-wise shrinkage: sign(x) * max(|x| - tau_c, 0).

    ``x`` is B x C x L and ``tau`` is B x C with nonnegative entries.
    Gradient w.r.t. x is 1 where |x| > tau and 0 otherwise (the boundary
    counts as 0); gradient w.r.t. tau is -sign(x) on the surviving entries.
    """
    if x.data.ndim != 3 or tau.data.ndim != 2:
        raise AutogradError(
            f"soft_threshold expects B x C x L input and B x C thresholds, got {x.data.shape} and {tau.data.shape}")
    if tau.data.shape != x.data.shape[:2]:
        raise AutogradError(f"threshold shape {tau.data.shape} != {x.data.shape[:2]}")
    if np.any(tau.data < 0):
        raise AutogradError("soft_threshold requires nonnegative thresholds")
    mag = np.abs(x.data)
    mag -= tau.data[:, :, None]
    alive = mag > 0
    np.maximum(mag, 0, out=mag)
    sgn = np.sign(x.data)
    mag *= sgn
    out = Tensor(mag)

    def bwd(g):
        gated = g * alive
        gtau = -(gated * sgn).sum(axis=2)
        return gated, gtau

    return record(out, (x, tau), bwd)
