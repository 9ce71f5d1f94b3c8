"""File format round-trips, stratified splitting, batch iteration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsrkit.binfmt import (
    BadMagicError,
    CountMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)
from wsrkit.dataio import (
    Dataset,
    DatasetHeader,
    SignalRecord,
    SplitSpec,
    batch_iter,
    one_hot,
    read_wsig,
    stratified_split,
    write_wsig,
)


def make_dataset(n_per_cell=10, classes=("A", "B"), snrs=(0.0, 10.0), length=16, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for ci in range(len(classes)):
        for snr in snrs:
            for _ in range(n_per_cell):
                records.append(SignalRecord(
                    iq=rng.normal(size=(2, length)).astype(np.float32),
                    class_idx=ci, snr_db=snr, labeled=True))
    header = DatasetHeader(version=1, length=length, class_names=list(classes),
                           record_count=len(records), snr_grid=list(snrs),
                           provenance="test")
    return Dataset(header, records)


class TestWsigFormat:
    def test_round_trip_reserializes_identically(self, tmp_path):
        ds = make_dataset(n_per_cell=25)
        p1, p2 = tmp_path / "a.wsig", tmp_path / "b.wsig"
        write_wsig(ds, p1)
        write_wsig(read_wsig(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_values(self, tmp_path):
        ds = make_dataset()
        path = tmp_path / "d.wsig"
        write_wsig(ds, path)
        loaded = read_wsig(path)
        assert loaded.header == ds.header
        for a, b in zip(loaded.records, ds.records):
            np.testing.assert_array_equal(a.iq, b.iq)
            assert (a.class_idx, a.snr_db, a.labeled) == (b.class_idx, b.snr_db, b.labeled)

    def test_empty_dataset_round_trips(self, tmp_path):
        header = DatasetHeader(version=1, length=8, class_names=["A"],
                               record_count=0, snr_grid=[0.0])
        path = tmp_path / "empty.wsig"
        write_wsig(Dataset(header, []), path)
        assert len(read_wsig(path)) == 0

    def test_truncation_detected(self, tmp_path):
        ds = make_dataset(n_per_cell=5)
        path = tmp_path / "d.wsig"
        write_wsig(ds, path)
        raw = path.read_bytes()
        # drop one record's worth of payload: header still promises them all
        rec_size = 2 + 4 + 1 + 2 * ds.header.length * 4
        path.write_bytes(raw[:-rec_size])
        with pytest.raises(TruncatedFileError):
            read_wsig(path)

    def test_trailing_garbage_detected(self, tmp_path):
        ds = make_dataset(n_per_cell=2)
        path = tmp_path / "d.wsig"
        write_wsig(ds, path)
        path.write_bytes(path.read_bytes() + b"extra")
        with pytest.raises(CountMismatchError):
            read_wsig(path)

    def test_bad_magic(self, tmp_path):
        ds = make_dataset(n_per_cell=1)
        path = tmp_path / "d.wsig"
        write_wsig(ds, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"JUNK"
        path.write_bytes(bytes(raw))
        with pytest.raises(BadMagicError):
            read_wsig(path)

    def test_version_mismatch(self, tmp_path):
        ds = make_dataset(n_per_cell=1)
        path = tmp_path / "d.wsig"
        write_wsig(ds, path)
        raw = bytearray(path.read_bytes())
        raw[4] = 2
        path.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatchError):
            read_wsig(path)

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(0, 7), length=st.integers(4, 24), seed=st.integers(0, 10_000))
    def test_round_trip_property(self, tmp_path_factory, n, length, seed):
        rng = np.random.default_rng(seed)
        records = [SignalRecord(iq=rng.normal(size=(2, length)).astype(np.float32),
                                class_idx=int(rng.integers(0, 3)),
                                snr_db=float(rng.normal()),
                                labeled=bool(rng.integers(0, 2)))
                   for _ in range(n)]
        header = DatasetHeader(version=1, length=length, class_names=["x", "y", "z"],
                               record_count=n, snr_grid=[0.0])
        path = tmp_path_factory.mktemp("rt") / "d.wsig"
        write_wsig(Dataset(header, records), path)
        loaded = read_wsig(path)
        for a, b in zip(loaded.records, records):
            np.testing.assert_array_equal(a.iq, b.iq)
            assert a.labeled == b.labeled


class TestStratifiedSplit:
    def test_quota_arithmetic(self):
        ds = make_dataset(n_per_cell=100, classes=("A",), snrs=(0.0,))
        labeled, unlabeled, test = stratified_split(ds, SplitSpec(labeled_frac=0.05, seed=1))
        assert (len(test), len(labeled), len(unlabeled)) == (20, 4, 76)

    def test_fully_supervised(self):
        ds = make_dataset(n_per_cell=10)
        labeled, unlabeled, test = stratified_split(ds, SplitSpec(labeled_frac=1.0, seed=2))
        assert len(unlabeled) == 0
        assert len(labeled) + len(test) == len(ds)

    def test_partition_property(self):
        ds = make_dataset(n_per_cell=13, classes=("A", "B", "C"))
        parts = stratified_split(ds, SplitSpec(labeled_frac=0.3, seed=3))
        sigs = [rec.iq.tobytes() for part in parts for rec in part.records]
        assert len(sigs) == len(ds)
        assert len(set(sigs)) == len(ds)  # pairwise disjoint (iq values are unique)

    def test_per_cell_stratification(self):
        ds = make_dataset(n_per_cell=20, classes=("A", "B"), snrs=(0.0, 6.0, 12.0))
        labeled, unlabeled, test = stratified_split(ds, SplitSpec(labeled_frac=0.25, seed=4))
        for part, expect in ((test, 4), (labeled, 4), (unlabeled, 12)):
            counts = {}
            for rec in part.records:
                counts[(rec.class_idx, rec.snr_db)] = counts.get((rec.class_idx, rec.snr_db), 0) + 1
            assert set(counts.values()) == {expect}

    def test_unlabeled_flagged(self):
        ds = make_dataset(n_per_cell=10)
        _, unlabeled, _ = stratified_split(ds, SplitSpec(labeled_frac=0.5, seed=5))
        assert all(not rec.labeled for rec in unlabeled.records)

    def test_seed_deterministic(self):
        ds = make_dataset(n_per_cell=9)
        a = stratified_split(ds, SplitSpec(labeled_frac=0.4, seed=6))
        b = stratified_split(ds, SplitSpec(labeled_frac=0.4, seed=6))
        for pa, pb in zip(a, b):
            assert [r.iq.tobytes() for r in pa.records] == \
                [r.iq.tobytes() for r in pb.records]

    def test_different_seeds_differ(self):
        ds = make_dataset(n_per_cell=9)
        a = stratified_split(ds, SplitSpec(labeled_frac=0.4, seed=6))
        b = stratified_split(ds, SplitSpec(labeled_frac=0.4, seed=7))
        assert [r.iq.tobytes() for r in a[2].records] != \
            [r.iq.tobytes() for r in b[2].records]

    def test_bad_fracs_rejected(self):
        with pytest.raises(ValueError):
            SplitSpec(labeled_frac=0.0)
        with pytest.raises(ValueError):
            SplitSpec(labeled_frac=0.5, test_frac=1.0)


class TestBatchIter:
    def test_training_mode_drops_short_batch(self):
        ds = make_dataset(n_per_cell=5, classes=("A",), snrs=(0.0, 1.0))
        batches = list(batch_iter(ds.records, 3, seed=1, drop_last=True))
        assert len(batches) == 3
        assert all(b[0].shape == (3, 2, 16) for b in batches)

    def test_eval_mode_covers_everything(self):
        ds = make_dataset(n_per_cell=5, classes=("A",), snrs=(0.0, 1.0))
        batches = list(batch_iter(ds.records, 3, seed=1, drop_last=False))
        assert len(batches) == 4
        assert sum(b[0].shape[0] for b in batches) == 10
        seen = np.concatenate([b[2] for b in batches])
        assert len(seen) == 10

    def test_same_seed_same_order(self):
        ds = make_dataset(n_per_cell=4)
        a = [b[1].tolist() for b in batch_iter(ds.records, 4, seed=9)]
        b = [b[1].tolist() for b in batch_iter(ds.records, 4, seed=9)]
        assert a == b

    def test_one_hot(self):
        out = one_hot(np.array([0, 2, 1]), 3)
        np.testing.assert_array_equal(out, [[1, 0, 0], [0, 0, 1], [0, 1, 0]])
