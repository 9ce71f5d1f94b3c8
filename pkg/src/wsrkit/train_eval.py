"""Training loops (supervised and semi-supervised) and evaluation metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autograd import (
    AdamState,
    AutogradError,
    Tape,
    Tensor,
    adam_step,
    backward,
    no_grad,
    softmax_cross_entropy,
)
from .checkpoint import save_checkpoint
from .dataio import SignalRecord, one_hot
from .drsn import DrsnModel, drsn_forward
from .mixmatch import MixMatchConfig, mixmatch_batch, semi_loss


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 0.001
    mode: str = "supervised"           # or "mixmatch"
    mixmatch: MixMatchConfig = field(default_factory=MixMatchConfig)
    seed: int = 0
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mode not in ("supervised", "mixmatch"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.mode == "mixmatch" and self.batch_size < 2:
            raise ValueError("mixmatch mode needs batch_size >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class StepStats:
    epoch: int
    step: int
    loss: float
    loss_x: float
    loss_u: float


@dataclass
class EpochStats:
    epoch: int
    loss: float
    loss_x: float
    loss_u: float
    val_acc: float | None = None


@dataclass
class TrainLog:
    epochs: list[EpochStats] = field(default_factory=list)
    steps: list[StepStats] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "loss_x", "loss_u", "val_acc"])
            for e in self.epochs:
                val = "" if e.val_acc is None else f"{e.val_acc:.9g}"
                writer.writerow([e.epoch, f"{e.loss:.9g}", f"{e.loss_x:.9g}",
                                 f"{e.loss_u:.9g}", val])


class _Cycler:
    """Endless stream of full training batches.

    Each pass over the records is an independent shuffle; leftover indices
    from one pass are carried into the next so every batch has exactly
    batch_size records even when the set is smaller than the batch.
    """

    def __init__(self, records, batch_size, seed):
        self.records = records
        self.batch_size = batch_size
        self.seed = seed
        self.pass_idx = 0
        self._queue: list[int] = []

    def __next__(self):
        while len(self._queue) < self.batch_size:
            rng = np.random.default_rng(np.random.SeedSequence(
                (self.seed % 2**64, self.pass_idx)))
            self._queue.extend(rng.permutation(len(self.records)).tolist())
            self.pass_idx += 1
        idxs, self._queue = self._queue[:self.batch_size], self._queue[self.batch_size:]
        sigs = np.stack([self.records[i].iq for i in idxs]).astype(np.float32)
        classes = np.array([self.records[i].class_idx for i in idxs], dtype=np.int64)
        snrs = np.array([self.records[i].snr_db for i in idxs], dtype=np.float32)
        return Tensor(sigs), classes, snrs


def _mix_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([p % 2**64 for p in parts]).generate_state(1)[0])


def train(model: DrsnModel, labeled: Sequence[SignalRecord],
          unlabeled: Sequence[SignalRecord], cfg: TrainConfig,
          val: Sequence[SignalRecord] | None = None,
          keep_steps: bool = False) -> TrainLog:
    """Train in place; returns the per-epoch (and optionally per-step) log.

    Supervised epochs sweep the labeled set. Mixmatch epochs sweep the
    larger of the two sets while cycling the smaller, so the unlabeled
    pool is fully used; a non-finite loss aborts with the step index.
    """
    if not labeled:
        raise ValueError("labeled set must be nonempty")
    mm = cfg.mixmatch
    use_unlabeled = cfg.mode == "mixmatch" and mm.lambda_u > 0
    if use_unlabeled and not unlabeled:
        raise ValueError("mixmatch mode with lambda_u > 0 needs unlabeled records")
    num_classes = model.config.num_classes
    state = AdamState(lr=cfg.lr)
    log = TrainLog()
    best_val = -1.0

    if cfg.mode == "supervised":
        steps_per_epoch = len(labeled) // cfg.batch_size
    else:
        pool = max(len(labeled), len(unlabeled) if use_unlabeled else 0)
        steps_per_epoch = pool // cfg.batch_size
    if steps_per_epoch < 1:
        raise ValueError(
            f"batch size {cfg.batch_size} exceeds the training pool; no full batch fits")

    for epoch in range(cfg.epochs):
        lab_cycle = _Cycler(labeled, cfg.batch_size, _mix_seed(cfg.seed, 1, epoch))
        unl_cycle = (_Cycler(unlabeled, cfg.batch_size, _mix_seed(cfg.seed, 2, epoch))
                     if use_unlabeled else None)
        mix_rng = np.random.default_rng(np.random.SeedSequence(
            (mm.seed % 2**64, epoch)))
        if mm.ramp_epochs > 0:
            lam_u = mm.lambda_u * min(1.0, (epoch + 1) / mm.ramp_epochs)
        else:
            lam_u = mm.lambda_u

        sums = np.zeros(3)
        for step in range(steps_per_epoch):
            xb, yb, _ = next(lab_cycle)
            model.zero_grad()
            try:
                if cfg.mode == "supervised":
                    with Tape() as tape:
                        logits = drsn_forward(model, xb)
                        loss = softmax_cross_entropy(logits, Tensor(one_hot(yb, num_classes)))
                    loss_x_v, loss_u_v = loss.item(), 0.0
                else:
                    ub = next(unl_cycle)[0].data if unl_cycle is not None else None
                    mixed = mixmatch_batch(
                        lambda t: drsn_forward(model, t),
                        xb.data, one_hot(yb, num_classes), ub, mm, mix_rng)
                    with Tape() as tape:
                        loss, loss_x, loss_u = semi_loss(
                            lambda t: drsn_forward(model, t), mixed, mm, lambda_u=lam_u)
                    loss_x_v, loss_u_v = loss_x.item(), loss_u.item()
            except AutogradError as exc:
                raise AutogradError(f"epoch {epoch}, step {step}: {exc}") from exc
            loss_v = loss.item()
            if not np.isfinite(loss_v):
                raise AutogradError(
                    f"non-finite loss at epoch {epoch}, step {step}")
            backward(loss, tape)
            adam_step(model.params, model.grads(), state)
            sums += (loss_v, loss_x_v, loss_u_v)
            if keep_steps:
                log.steps.append(StepStats(epoch, step, loss_v, loss_x_v, loss_u_v))

        val_acc = evaluate(model, val).overall_acc if val else None
        log.epochs.append(EpochStats(
            epoch, *(sums / steps_per_epoch), val_acc=val_acc))
        if cfg.checkpoint_path and val_acc is not None and val_acc > best_val:
            best_val = val_acc
            save_checkpoint(model, str(cfg.checkpoint_path) + ".best")

    if cfg.checkpoint_path:
        save_checkpoint(model, cfg.checkpoint_path)
    return log


# -- evaluation ---------------------------------------------------------------

@dataclass
class EvalReport:
    overall_acc: float
    per_snr_acc: dict[float, float]
    per_class_acc: dict[int, float]
    confusion: np.ndarray      # rows true class, columns predicted
    correct: int
    wrong: int

    def to_dict(self) -> dict:
        return {
            "overall_acc": self.overall_acc,
            "correct": self.correct,
            "wrong": self.wrong,
            "per_snr_acc": {f"{snr:g}": acc for snr, acc in sorted(self.per_snr_acc.items())},
            "per_class_acc": {str(c): acc for c, acc in sorted(self.per_class_acc.items())},
            "confusion": self.confusion.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            overall_acc=float(d["overall_acc"]),
            per_snr_acc={float(k): float(v) for k, v in d["per_snr_acc"].items()},
            per_class_acc={int(k): float(v) for k, v in d["per_class_acc"].items()},
            confusion=np.array(d["confusion"], dtype=np.int64),
            correct=int(d["correct"]),
            wrong=int(d["wrong"]),
        )


def evaluate(model: DrsnModel, records: Sequence[SignalRecord],
             batch_size: int = 256) -> EvalReport:
    """Argmax accuracy plus per-SNR, per-class and confusion breakdowns.

    Ties in the logits resolve to the lower class index; iteration order
    of the records does not affect any reported number.
    """
    if not records:
        raise ValueError("evaluation set must be nonempty")
    num_classes = model.config.num_classes
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    snr_hits: dict[float, list[int]] = {}
    with no_grad():
        for start in range(0, len(records), batch_size):
            chunk = records[start:start + batch_size]
            sigs = np.stack([r.iq for r in chunk]).astype(np.float32)
            logits = drsn_forward(model, Tensor(sigs)).data
            preds = logits.argmax(axis=1)  # argmax takes the first maximum
            for rec, pred in zip(chunk, preds):
                if not 0 <= rec.class_idx < num_classes:
                    raise ValueError(f"class index {rec.class_idx} out of range")
                confusion[rec.class_idx, pred] += 1
                hit = snr_hits.setdefault(float(rec.snr_db), [0, 0])
                hit[int(pred == rec.class_idx)] += 1

    correct = int(np.trace(confusion))
    total = int(confusion.sum())
    per_class = {}
    for c in range(num_classes):
        row = confusion[c].sum()
        if row:
            per_class[c] = float(confusion[c, c] / row)
    per_snr = {snr: miss_hit[1] / (miss_hit[0] + miss_hit[1])
               for snr, miss_hit in snr_hits.items()}
    return EvalReport(
        overall_acc=correct / total,
        per_snr_acc=per_snr,
        per_class_acc=per_class,
        confusion=confusion,
        correct=correct,
        wrong=total - correct,
    )


def emit_report(report: EvalReport, out_dir, formats: tuple[str, ...] = ("csv", "json")) -> list[str]:
    """Write accuracy-vs-SNR and confusion CSVs plus the full JSON report."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        acc_path = out / "acc_by_snr.csv"
        with open(acc_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["snr_db", "accuracy"])
            for snr in sorted(report.per_snr_acc):
                writer.writerow([f"{snr:g}", f"{report.per_snr_acc[snr]:.9g}"])
        conf_path = out / "confusion.csv"
        with open(conf_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["true\\pred"] + [str(c) for c in range(report.confusion.shape[1])])
            for c, row in enumerate(report.confusion):
                writer.writerow([str(c)] + [str(int(v)) for v in row])
        written += [str(acc_path), str(conf_path)]
    if "json" in formats:
        json_path = out / "report.json"
        with open(json_path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(str(json_path))
    return written
