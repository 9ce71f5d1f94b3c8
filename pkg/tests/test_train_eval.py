"""Training loop behavior, evaluation metrics, report emission."""

import json

import numpy as np
import pytest

from wsrkit.autograd import AutogradError
from wsrkit.dataio import SignalRecord
from wsrkit.drsn import DrsnConfig, DrsnModel
from wsrkit.mixmatch import MixMatchConfig
from wsrkit.sigsyn import SynthSpec, synth_dataset
from wsrkit.train_eval import (
    EvalReport,
    TrainConfig,
    emit_report,
    evaluate,
    train,
)


def tiny_cfg(seed=0, num_classes=2):
    return DrsnConfig(num_classes=num_classes, input_len=32, num_stacks=1,
                      channels=4, fc_hidden=0, seed=seed)


def synth_records(classes, per_cell, snr, seed=0, window_len=32):
    spec = SynthSpec(classes=classes, per_cell=per_cell, snr_grid=(snr,),
                     window_len=window_len, seed=seed)
    return synth_dataset(spec).records


def separable_records(n=200, seed=4, length=32):
    """Two classes split by a mean offset in the I plane: linearly separable."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        cls = i % 2
        base = rng.normal(scale=0.3, size=(2, length))
        base[0] += 0.8 if cls == 0 else -0.8
        records.append(SignalRecord(iq=base.astype(np.float32), class_idx=cls, snr_db=100.0))
    return records


class TestTrain:
    def test_loss_decreases_on_fixture(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=4, snr=100.0, seed=1)
        model = DrsnModel.init(tiny_cfg(seed=2))
        cfg = TrainConfig(epochs=3, batch_size=4, lr=0.01, seed=3)
        log = train(model, records, [], cfg, keep_steps=True)
        assert log.steps[-1].loss < log.steps[0].loss

    def test_overfit_sanity(self):
        # 200 clean, linearly separable records: the network must reach
        # 100% training accuracy within 20 epochs
        records = separable_records()
        model = DrsnModel.init(tiny_cfg(seed=5))
        cfg = TrainConfig(epochs=20, batch_size=32, lr=0.01, seed=6)
        train(model, records, [], cfg)
        report = evaluate(model, records)
        assert report.overall_acc == 1.0

    def test_epochs_zero_rejected(self):
        with pytest.raises(ValueError, match="epochs"):
            TrainConfig(epochs=0)

    def test_mixmatch_lambda0_equals_supervised_exactly(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=8, snr=12.0, seed=7)
        mm = MixMatchConfig(lambda_u=0.0, augment_enabled=False, fixed_lambda=1.0)
        sup_cfg = TrainConfig(epochs=3, batch_size=8, lr=0.005, mode="supervised", seed=8)
        mm_cfg = TrainConfig(epochs=3, batch_size=8, lr=0.005, mode="mixmatch",
                             mixmatch=mm, seed=8)

        m1 = DrsnModel.init(tiny_cfg(seed=9))
        log_sup = train(m1, records, [], sup_cfg, keep_steps=True)
        m2 = DrsnModel.init(tiny_cfg(seed=9))
        log_mm = train(m2, records, [], mm_cfg, keep_steps=True)

        assert [s.loss for s in log_sup.steps] == [s.loss for s in log_mm.steps]
        for name in m1.params:
            np.testing.assert_array_equal(m1.params[name].data, m2.params[name].data)

    def test_mixmatch_needs_unlabeled(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=4, snr=12.0, seed=10)
        cfg = TrainConfig(epochs=1, batch_size=4, mode="mixmatch",
                          mixmatch=MixMatchConfig(lambda_u=75.0), seed=11)
        with pytest.raises(ValueError, match="unlabeled"):
            train(DrsnModel.init(tiny_cfg(seed=12)), records, [], cfg)

    def test_batch_larger_than_pool_rejected(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=1, snr=12.0, seed=13)
        cfg = TrainConfig(epochs=1, batch_size=64, seed=14)
        with pytest.raises(ValueError, match="batch size"):
            train(DrsnModel.init(tiny_cfg(seed=15)), records, [], cfg)

    def test_non_finite_loss_aborts_with_step(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=4, snr=12.0, seed=16)
        bad = SignalRecord(iq=np.full((2, 32), np.nan, dtype=np.float32),
                           class_idx=0, snr_db=12.0)
        cfg = TrainConfig(epochs=1, batch_size=len(records) + 1, seed=17)
        with pytest.raises(AutogradError, match=r"step 0"):
            train(DrsnModel.init(tiny_cfg(seed=18)), records + [bad], [], cfg)

    def test_loss_composition_every_step(self):
        labeled = synth_records(("BPSK", "QPSK"), per_cell=6, snr=6.0, seed=19)
        unlabeled = synth_records(("BPSK", "QPSK"), per_cell=10, snr=6.0, seed=20)
        cfg = TrainConfig(epochs=2, batch_size=6, mode="mixmatch",
                          mixmatch=MixMatchConfig(lambda_u=75.0), seed=21)
        model = DrsnModel.init(tiny_cfg(seed=22))
        log = train(model, labeled, unlabeled, cfg, keep_steps=True)
        assert log.steps
        for s in log.steps:
            assert s.loss == pytest.approx(s.loss_x + 75.0 * s.loss_u, abs=1e-5)


class TestEvaluate:
    def test_accuracy_arithmetic(self):
        report = EvalReport(overall_acc=444 / 500, per_snr_acc={}, per_class_acc={},
                            confusion=np.zeros((2, 2), dtype=np.int64),
                            correct=444, wrong=56)
        assert report.overall_acc == pytest.approx(0.888)
        assert report.correct + report.wrong == 500

    def test_perfect_model_diagonal(self):
        records = separable_records(n=100, seed=23)
        model = DrsnModel.init(tiny_cfg(seed=24))
        train(model, records, [], TrainConfig(epochs=15, batch_size=25, lr=0.01, seed=25))
        report = evaluate(model, records)
        assert report.overall_acc == 1.0
        off_diag = report.confusion - np.diag(np.diag(report.confusion))
        assert off_diag.sum() == 0

    def test_constant_model_on_balanced_set(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=20, snr=10.0, seed=26)
        model = DrsnModel.init(tiny_cfg(seed=27))
        # zero head forces all-equal logits; ties resolve to class 0
        model.params["head.out.w"].data[:] = 0.0
        model.params["head.out.b"].data[:] = 0.0
        report = evaluate(model, records)
        assert report.overall_acc == pytest.approx(0.5)
        assert report.confusion[:, 0].sum() == len(records)

    def test_order_independent(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=10, snr=8.0, seed=28)
        model = DrsnModel.init(tiny_cfg(seed=29))
        a = evaluate(model, records)
        b = evaluate(model, list(reversed(records)))
        assert a.overall_acc == b.overall_acc
        np.testing.assert_array_equal(a.confusion, b.confusion)
        assert a.per_snr_acc == b.per_snr_acc

    def test_per_snr_decomposition(self):
        spec = SynthSpec(classes=("BPSK", "QPSK"), per_cell=10,
                         snr_grid=(0.0, 10.0), window_len=32, seed=30)
        records = synth_dataset(spec).records
        model = DrsnModel.init(tiny_cfg(seed=31))
        report = evaluate(model, records)
        strata_correct = sum(
            round(acc * sum(1 for r in records if r.snr_db == snr))
            for snr, acc in report.per_snr_acc.items())
        assert strata_correct == report.correct

    def test_confusion_rows_match_class_totals(self):
        records = synth_records(("BPSK", "QPSK"), per_cell=15, snr=6.0, seed=32)
        model = DrsnModel.init(tiny_cfg(seed=33))
        report = evaluate(model, records)
        for c in range(2):
            expected = sum(1 for r in records if r.class_idx == c)
            assert report.confusion[c].sum() == expected

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            evaluate(DrsnModel.init(tiny_cfg()), [])


class TestEmitReport:
    def _report(self):
        per_snr = {float(s): 0.5 + 0.04 * i for i, s in enumerate(range(-6, 13, 2))}
        confusion = np.array([[40, 10], [5, 45]], dtype=np.int64)
        return EvalReport(overall_acc=0.85, per_snr_acc=per_snr,
                          per_class_acc={0: 0.8, 1: 0.9}, confusion=confusion,
                          correct=85, wrong=15)

    def test_csv_row_count(self, tmp_path):
        emit_report(self._report(), tmp_path)
        lines = (tmp_path / "acc_by_snr.csv").read_text().strip().split("\n")
        assert len(lines) == 1 + 10

    def test_json_round_trip(self, tmp_path):
        report = self._report()
        emit_report(report, tmp_path)
        loaded = EvalReport.from_dict(json.loads((tmp_path / "report.json").read_text()))
        assert loaded.overall_acc == report.overall_acc
        assert loaded.per_snr_acc == report.per_snr_acc
        np.testing.assert_array_equal(loaded.confusion, report.confusion)

    def test_confusion_csv_row_sums(self, tmp_path):
        report = self._report()
        emit_report(report, tmp_path)
        lines = (tmp_path / "confusion.csv").read_text().strip().split("\n")[1:]
        for c, line in enumerate(lines):
            cells = [int(v) for v in line.split(",")[1:]]
            assert sum(cells) == report.confusion[c].sum()
