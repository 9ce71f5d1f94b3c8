"""Semi-supervised batch construction and the combined loss.

Given a labeled batch X and an equally sized unlabeled batch U, one
training step:

1. augments every x once and every u K times (plane flips + local
   smoothing),
2. guesses a label for each u by averaging the model's predictions over
   its K augmented copies and sharpening the average,
3. mixes each augmented example with a partner drawn from the shuffled
   union, biased so the mix stays closer to the original,
4. scores the mixed labeled part with cross-entropy and the mixed
   unlabeled part with a squared distance between predicted and guessed
   distributions.

Label guessing never touches the gradient tape; guessed labels enter the
loss as constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .autograd import Tensor, no_grad, softmax, softmax_cross_entropy, square, tmean

ModelFn = Callable[[Tensor], Tensor]


@dataclass(frozen=True)
class MixMatchConfig:
    T: float = 0.5            # sharpening temperature
    K: int = 2                # augmentations per unlabeled example
    alpha: float = 0.75       # Beta parameter for mixing coefficients
    lambda_u: float = 75.0    # unlabeled loss weight
    smooth_frac: float = 0.05
    seed: int = 0
    augment_enabled: bool = True
    # Testing/ablation hooks: pin the mixing coefficient instead of
    # sampling, or ramp lambda_u linearly over the first N epochs (0 = off).
    fixed_lambda: float | None = None
    ramp_epochs: int = 0

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.lambda_u < 0:
            raise ValueError("lambda_u must be >= 0")
        if not 0.0 <= self.smooth_frac < 1.0:
            raise ValueError("smooth_frac must lie in [0, 1)")


@dataclass
class MixedBatch:
    """Mixed labeled part (B rows) and unlabeled part (B*K rows)."""

    x_signals: np.ndarray   # B x 2 x L
    x_labels: np.ndarray    # B x C simplex rows
    u_signals: np.ndarray   # B*K x 2 x L
    u_labels: np.ndarray    # B*K x C simplex rows


# -- augmentations ------------------------------------------------------------

def random_flip(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Negate the whole I and/or Q plane, each with probability 1/2."""
    out = x.copy()
    flip_i, flip_q = rng.integers(0, 2, size=2)
    if flip_i:
        out[0] = -out[0]
    if flip_q:
        out[1] = -out[1]
    return out


def random_smooth(x: np.ndarray, rng: np.random.Generator, frac: float) -> np.ndarray:
    """Replace a few interior samples per plane by their neighbors' mean.

    ceil(frac * L) interior indices are drawn without replacement per
    plane; replacements read the original values, so selections never
    cascade.
    """
    length = x.shape[1]
    if length < 3:
        raise ValueError("random_smooth needs at least 3 samples")
    n_sel = min(int(np.ceil(frac * length)), length - 2)
    out = x.copy()
    if n_sel == 0:
        return out
    for plane in range(x.shape[0]):
        idx = rng.choice(np.arange(1, length - 1), size=n_sel, replace=False)
        out[plane, idx] = 0.5 * (x[plane, idx - 1] + x[plane, idx + 1])
    return out


def augment(x: np.ndarray, rng: np.random.Generator, cfg: MixMatchConfig) -> np.ndarray:
    """Stochastic augmentation: flip then smooth (identity when disabled)."""
    if not cfg.augment_enabled:
        return x.copy()
    return random_smooth(random_flip(x, rng), rng, cfg.smooth_frac)


# -- label guessing -----------------------------------------------------------

def sharpen(p: np.ndarray, temperature: float) -> np.ndarray:
    """Lower the entropy of simplex rows: p_i^(1/T) renormalized."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < -1e-6) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-6):
        raise ValueError("sharpen expects rows on the probability simplex")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    powered = np.power(np.clip(p, 0.0, None), 1.0 / temperature)
    return powered / powered.sum(axis=-1, keepdims=True)


def guess_label(model: ModelFn, u: np.ndarray, K: int, T: float,
                rng: np.random.Generator, cfg: MixMatchConfig) -> np.ndarray:
    """Sharpened mean prediction over K augmentations of one example."""
    preds = []
    with no_grad():
        for _ in range(K):
            aug = augment(u, rng, cfg)
            logits = model(Tensor(aug[None, :, :]))
            preds.append(softmax(logits).data[0])
    return sharpen(np.mean(preds, axis=0), T)


# -- mixing -------------------------------------------------------------------

def _draw_lambda(alpha: float, rng: np.random.Generator) -> float:
    """Beta(alpha, alpha) sample via two gamma draws (platform-stable)."""
    g1 = rng.gamma(alpha)
    g2 = rng.gamma(alpha)
    return float(g1 / (g1 + g2))


def mixup(x1: np.ndarray, p1: np.ndarray, x2: np.ndarray, p2: np.ndarray,
          alpha: float, rng: np.random.Generator,
          fixed_lambda: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Convex mix biased toward the first argument.

    The raw Beta draw is folded to lam = max(draw, 1 - draw) >= 0.5, so the
    mixed example always stays at least as close to (x1, p1) as to
    (x2, p2). ``fixed_lambda=1.0`` bypasses mixing entirely.
    """
    for p in (p1, p2):
        if np.any(p < -1e-6) or abs(float(p.sum()) - 1.0) > 1e-6:
            raise ValueError("mixup labels must lie on the probability simplex")
    if fixed_lambda is None:
        raw = _draw_lambda(alpha, rng)
        lam = max(raw, 1.0 - raw)
    else:
        lam = float(fixed_lambda)
        if lam == 1.0:
            return x1.copy(), p1.copy()
    x = lam * x1 + (1.0 - lam) * x2
    p = lam * p1 + (1.0 - lam) * p2
    return x.astype(x1.dtype), p.astype(p1.dtype)


def mixmatch_batch(model: ModelFn, x_signals: np.ndarray, x_labels: np.ndarray,
                   u_signals: np.ndarray | None, cfg: MixMatchConfig,
                   rng: np.random.Generator) -> MixedBatch:
    """Build one mixed batch from B labeled and B unlabeled examples.

    Augmentation draws run in batch order (labeled first, then each
    unlabeled example's K copies); the shuffled union W partners the
    labeled rows first, then the unlabeled rows, consuming W in order.

    ``u_signals=None`` is the degenerate labeled-only mode (used when the
    unlabeled loss weight is zero): no guessing happens and the mixing
    pool is just the augmented labeled batch.
    """
    bsz = len(x_signals)
    if bsz < 1:
        raise ValueError("labeled batch must be nonempty")
    if u_signals is not None and len(u_signals) != bsz:
        raise ValueError(
            f"labeled and unlabeled batches must match in size, got {bsz} and {len(u_signals)}")
    k = cfg.K

    x_hat = np.stack([augment(x, rng, cfg) for x in x_signals])

    if u_signals is None:
        u_hat = np.empty((0,) + x_hat.shape[1:], dtype=x_hat.dtype)
        u_labels = np.empty((0, x_labels.shape[1]), dtype=np.float32)
        k = 0
    else:
        u_hat = np.empty((bsz * k,) + u_signals.shape[1:], dtype=u_signals.dtype)
        for b in range(bsz):
            for j in range(k):
                u_hat[b * k + j] = augment(u_signals[b], rng, cfg)
        with no_grad():
            probs = softmax(model(Tensor(u_hat))).data
        q = sharpen(probs.reshape(bsz, k, -1).mean(axis=1), cfg.T).astype(np.float32)
        u_labels = np.repeat(q, k, axis=0)

    all_signals = np.concatenate([x_hat, u_hat])
    all_labels = np.concatenate([x_labels.astype(np.float32), u_labels])
    perm = rng.permutation(len(all_signals))

    xs, xl, us, ul = [], [], [], []
    for i in range(bsz):
        w = perm[i]
        s, p = mixup(x_hat[i], x_labels[i].astype(np.float32),
                     all_signals[w], all_labels[w],
                     cfg.alpha, rng, cfg.fixed_lambda)
        xs.append(s)
        xl.append(p)
    for i in range(bsz * k):
        w = perm[i + bsz]
        s, p = mixup(u_hat[i], u_labels[i], all_signals[w], all_labels[w],
                     cfg.alpha, rng, cfg.fixed_lambda)
        us.append(s)
        ul.append(p)
    return MixedBatch(
        x_signals=np.stack(xs), x_labels=np.stack(xl),
        u_signals=np.stack(us) if us else u_hat,
        u_labels=np.stack(ul) if ul else u_labels,
    )


# -- loss ---------------------------------------------------------------------

def semi_loss(model: ModelFn, batch: MixedBatch, cfg: MixMatchConfig,
              lambda_u: float | None = None) -> tuple[Tensor, Tensor, Tensor]:
    """(total, labeled, unlabeled) loss terms for a mixed batch.

    labeled: mean cross-entropy against the mixed label rows. unlabeled:
    squared distance between guessed and predicted distributions, averaged
    over rows and classes. total = labeled + lambda_u * unlabeled; with
    lambda_u = 0 the unlabeled model pass is skipped entirely.
    """
    lam_u = cfg.lambda_u if lambda_u is None else lambda_u
    logits_x = model(Tensor(batch.x_signals))
    loss_x = softmax_cross_entropy(logits_x, Tensor(batch.x_labels))
    if lam_u == 0.0 or len(batch.u_signals) == 0:
        zero = Tensor(np.zeros((), dtype=loss_x.data.dtype))
        return loss_x, loss_x, zero
    probs_u = softmax(model(Tensor(batch.u_signals)))
    loss_u = tmean(square(probs_u - Tensor(batch.u_labels)))
    total = loss_x + loss_u * float(lam_u)
    return total, loss_x, loss_u
