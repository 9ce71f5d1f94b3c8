"""End-to-end command-line behavior: flags, outputs, manifests, exit codes."""

import hashlib
import json

import numpy as np
import pytest

import wsrkit.autograd.nnops as nnops
from wsrkit.cli import main
from wsrkit.dataio import read_wsig


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_gen(tmp_path, name="ds", **kw):
    out = tmp_path / name
    args = ["gen", "--classes", kw.get("classes", "BPSK,QPSK"),
            "--per-cell", str(kw.get("per_cell", 6)),
            "--snr-min", str(kw.get("snr_min", 0)), "--snr-max", str(kw.get("snr_max", 4)),
            "--snr-step", str(kw.get("snr_step", 2)),
            "--len", str(kw.get("length", 32)),
            "--seed", str(kw.get("seed", 1)), "--out", str(out)]
    assert main(args) == 0
    return out / "dataset.wsig"


class TestGen:
    def test_record_count(self, tmp_path):
        path = run_gen(tmp_path, per_cell=50, snr_min=-6, snr_max=12, snr_step=2)
        ds = read_wsig(path)
        assert len(ds) == 2 * 10 * 50

    def test_deterministic_output(self, tmp_path):
        p1 = run_gen(tmp_path, "a", seed=9)
        p2 = run_gen(tmp_path, "b", seed=9)
        assert sha(p1) == sha(p2)

    def test_zero_snr_step_rejected(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "--snr-step", "0", "--out", str(tmp_path / "x")])
        assert exc.value.code != 0

    def test_manifest_written(self, tmp_path):
        path = run_gen(tmp_path)
        manifest = json.loads((path.parent / "manifest.json").read_text())
        assert manifest["command"] == "gen"
        assert str(path) in manifest["outputs"]
        assert manifest["outputs"][str(path)] == sha(path)

    def test_config_file_overridden_by_flag(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"per_cell": 3, "seed": 5}))
        out = tmp_path / "ds"
        assert main(["gen", "--classes", "BPSK", "--config", str(cfg),
                     "--per-cell", "2", "--len", "32", "--out", str(out)]) == 0
        ds = read_wsig(out / "dataset.wsig")
        assert len(ds) == 2 * 10  # flag wins over config file


class TestSplit:
    def test_header_counts(self, tmp_path):
        data = run_gen(tmp_path, per_cell=10)
        prefix = tmp_path / "sp" / "run"
        assert main(["split", "--in", str(data), "--test-frac", "0.2",
                     "--labeled-frac", "0.25", "--seed", "3",
                     "--out-prefix", str(prefix)]) == 0
        lab = read_wsig(tmp_path / "sp" / "run.labeled.wsig")
        unl = read_wsig(tmp_path / "sp" / "run.unlabeled.wsig")
        test = read_wsig(tmp_path / "sp" / "run.test.wsig")
        # per cell of 10: 2 test, 2 labeled, 6 unlabeled
        assert (len(lab), len(unl), len(test)) == (12, 36, 12)
        assert lab.header.record_count == 12

    def test_disjoint_by_digest(self, tmp_path):
        data = run_gen(tmp_path, per_cell=8)
        prefix = tmp_path / "sp" / "run"
        main(["split", "--in", str(data), "--labeled-frac", "0.5",
              "--out-prefix", str(prefix)])
        seen = set()
        total = 0
        for part in ("labeled", "unlabeled", "test"):
            ds = read_wsig(tmp_path / "sp" / f"run.{part}.wsig")
            for rec in ds.records:
                seen.add(rec.iq.tobytes())
                total += 1
        assert len(seen) == total == 2 * 3 * 8

    def test_full_labels_empty_unlabeled(self, tmp_path):
        data = run_gen(tmp_path, per_cell=5)
        prefix = tmp_path / "sp" / "run"
        main(["split", "--in", str(data), "--labeled-frac", "1.0",
              "--out-prefix", str(prefix)])
        assert len(read_wsig(tmp_path / "sp" / "run.unlabeled.wsig")) == 0

    def test_missing_input(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["split", "--in", str(tmp_path / "nope.wsig"),
                  "--out-prefix", str(tmp_path / "x")])


def run_train(tmp_path, data, name="tr", extra=()):
    out = tmp_path / name
    args = ["train", "--labeled", str(data), "--mode", "supervised",
            "--epochs", "4", "--batch", "12", "--lr", "0.01",
            "--stacks", "1", "--channels", "4", "--fc-hidden", "0",
            "--seed", "2", "--out", str(out), *extra]
    assert main(args) == 0
    return out


class TestTrainEvalCli:
    def test_smoke_writes_all_outputs(self, tmp_path):
        data = run_gen(tmp_path, per_cell=20, snr_min=12, snr_max=12)
        out = run_train(tmp_path, data)
        for name in ("checkpoint.wnet", "train_log.csv", "manifest.json"):
            assert (out / name).exists()

    def test_rerun_reproduces_log_bytes(self, tmp_path):
        data = run_gen(tmp_path, per_cell=15, snr_min=12, snr_max=12)
        out1 = run_train(tmp_path, data, "t1")
        out2 = run_train(tmp_path, data, "t2")
        assert sha(out1 / "train_log.csv") == sha(out2 / "train_log.csv")
        assert sha(out1 / "checkpoint.wnet") == sha(out2 / "checkpoint.wnet")

    def test_mixmatch_requires_unlabeled(self, tmp_path):
        data = run_gen(tmp_path, per_cell=5)
        with pytest.raises(SystemExit) as exc:
            main(["train", "--labeled", str(data), "--mode", "mixmatch",
                  "--out", str(tmp_path / "x")])
        assert exc.value.code != 0

    def test_eval_reports_and_is_deterministic(self, tmp_path):
        data = run_gen(tmp_path, per_cell=20, snr_min=12, snr_max=12)
        out = run_train(tmp_path, data)
        ev1, ev2 = tmp_path / "e1", tmp_path / "e2"
        for ev in (ev1, ev2):
            assert main(["eval", "--model", str(out / "checkpoint.wnet"),
                         "--data", str(data), "--out", str(ev)]) == 0
        assert sha(ev1 / "report.json") == sha(ev2 / "report.json")
        assert sha(ev1 / "acc_by_snr.csv") == sha(ev2 / "acc_by_snr.csv")
        report = json.loads((ev1 / "report.json").read_text())
        assert 0.0 <= report["overall_acc"] <= 1.0

    def test_eval_rejects_corrupt_checkpoint(self, tmp_path):
        data = run_gen(tmp_path, per_cell=5)
        out = run_train(tmp_path, data)
        ckpt = out / "checkpoint.wnet"
        raw = bytearray(ckpt.read_bytes())
        raw[:4] = b"EVIL"
        ckpt.write_bytes(bytes(raw))
        code = main(["eval", "--model", str(ckpt), "--data", str(data),
                     "--out", str(tmp_path / "ev")])
        assert code != 0

    def test_frame_length_mismatch_rejected(self, tmp_path):
        d32 = run_gen(tmp_path, "a", length=32)
        d64 = run_gen(tmp_path, "b", length=64)
        with pytest.raises(SystemExit):
            main(["train", "--labeled", str(d32), "--unlabeled", str(d64),
                  "--mode", "mixmatch", "--out", str(tmp_path / "x")])


class TestGradcheckCli:
    def test_fresh_build_passes(self, capsys):
        assert main(["gradcheck"]) == 0
        out = capsys.readouterr().out
        assert "all operator gradients verified" in out

    def test_injected_sign_bug_is_caught(self, capsys, monkeypatch):
        real_relu = nnops.np.maximum

        def broken_relu(a):
            from wsrkit.autograd.engine import Tensor, record
            out = Tensor(np.maximum(a.data, 0))
            return record(out, (a,), lambda g: (-g * (a.data > 0),))  # wrong sign

        import wsrkit.cli as cli
        monkeypatch.setattr(cli, "relu", broken_relu)
        code = main(["gradcheck"])
        out = capsys.readouterr().out
        assert code == 1
        assert "relu" in out and "FAIL" in out
