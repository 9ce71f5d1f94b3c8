"""Dataset container, the WSIG-v1 file format, splitting and batching.

WSIG-v1 layout: the :mod:`wsrkit.binfmt` container with magic ``WSIG``,
then one fixed-size block per record:

    u16 class_idx | f32 snr_db | u8 labeled | 2*L f32 (I plane, Q plane)

all little-endian, no padding. Records are stored power-normalized, so
training and evaluation read identical values with no loader-side
scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from .autograd import Tensor
from .binfmt import (
    CountMismatchError,
    TruncatedFileError,
    read_container,
    write_container,
)

MAGIC = b"WSIG"
VERSION = 1

# Canonical class-name table for the public capture archives this toolkit
# can ingest. Analog classes cannot be synthesized, only converted.
RADIOML_CLASSES = (
    "8PSK", "AM-DSB", "AM-SSB", "BPSK", "CPFSK", "GFSK",
    "PAM4", "QAM16", "QAM64", "QPSK", "WBFM",
)
RADIOML_ANALOG = frozenset({"AM-DSB", "AM-SSB", "WBFM"})


@dataclass
class SignalRecord:
    """One IQ frame: 2 x L float32 (I plane then Q plane) plus its tags."""

    iq: np.ndarray
    class_idx: int
    snr_db: float
    labeled: bool = True


@dataclass
class DatasetHeader:
    version: int
    length: int
    class_names: list[str]
    record_count: int
    snr_grid: list[float]
    provenance: str = ""

    def validate(self) -> None:
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError("class names must be unique")
        if self.length < 1:
            raise ValueError("frame length must be positive")


@dataclass
class Dataset:
    header: DatasetHeader
    records: list[SignalRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def with_records(self, records: list[SignalRecord]) -> "Dataset":
        header = replace(self.header, record_count=len(records))
        return Dataset(header, records)


def _record_dtype(length: int) -> np.dtype:
    return np.dtype([
        ("class_idx", "<u2"),
        ("snr_db", "<f4"),
        ("labeled", "u1"),
        ("iq", "<f4", (2, length)),
    ])


def write_wsig(dataset: Dataset, path) -> None:
    header = dataset.header
    header.validate()
    if header.record_count != len(dataset.records):
        raise CountMismatchError(
            f"header says {header.record_count} records, dataset holds {len(dataset.records)}")
    rt = _record_dtype(header.length)
    packed = np.zeros(len(dataset.records), dtype=rt)
    for i, rec in enumerate(dataset.records):
        if rec.iq.shape != (2, header.length):
            raise ValueError(f"record {i} has shape {rec.iq.shape}, header says (2, {header.length})")
        packed[i]["class_idx"] = rec.class_idx
        packed[i]["snr_db"] = rec.snr_db
        packed[i]["labeled"] = 1 if rec.labeled else 0
        packed[i]["iq"] = rec.iq
    meta = {
        "version": header.version,
        "length": header.length,
        "class_names": list(header.class_names),
        "record_count": header.record_count,
        "snr_grid": [float(s) for s in header.snr_grid],
        "provenance": header.provenance,
    }
    write_container(path, MAGIC, VERSION, meta, packed.tobytes())


def read_wsig(path) -> Dataset:
    meta, payload = read_container(path, MAGIC, VERSION)
    try:
        header = DatasetHeader(
            version=int(meta["version"]),
            length=int(meta["length"]),
            class_names=list(meta["class_names"]),
            record_count=int(meta["record_count"]),
            snr_grid=[float(s) for s in meta["snr_grid"]],
            provenance=str(meta.get("provenance", "")),
        )
        header.validate()
    except (KeyError, TypeError, ValueError) as exc:
        raise CountMismatchError(f"{path}: malformed dataset header: {exc}") from exc

    rt = _record_dtype(header.length)
    expected = header.record_count * rt.itemsize
    if len(payload) < expected:
        raise TruncatedFileError(
            f"{path}: payload holds {len(payload) // rt.itemsize} of "
            f"{header.record_count} records")
    if len(payload) > expected:
        raise CountMismatchError(
            f"{path}: {len(payload) - expected} trailing bytes beyond the declared record count")

    packed = np.frombuffer(payload, dtype=rt, count=header.record_count)
    records = [
        SignalRecord(
            iq=np.array(row["iq"], dtype=np.float32),
            class_idx=int(row["class_idx"]),
            snr_db=float(row["snr_db"]),
            labeled=bool(row["labeled"]),
        )
        for row in packed
    ]
    return Dataset(header, records)


# -- splitting --------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """Stratified hold-out parameters.

    ``test_frac`` of each (class, snr) cell goes to the test set;
    ``labeled_frac`` of the remainder keeps its label, the rest is marked
    unlabeled.
    """

    labeled_frac: float
    test_frac: float = 0.20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_frac < 1.0:
            raise ValueError("test_frac must lie in (0, 1)")
        if not 0.0 < self.labeled_frac <= 1.0:
            raise ValueError("labeled_frac must lie in (0, 1]")


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Partition into (labeled_train, unlabeled_train, test).

    Quotas are rounded half-up per cell; cells are processed in sorted
    (class, snr) order, each shuffled by its own RNG derived from the
    seed, so the same dataset and seed always produce the same split.
    """
    cells: dict[tuple[int, int], list[int]] = {}
    for i, rec in enumerate(dataset.records):
        key = (rec.class_idx, int(round(rec.snr_db * 1000)))
        cells.setdefault(key, []).append(i)

    labeled: list[SignalRecord] = []
    unlabeled: list[SignalRecord] = []
    test: list[SignalRecord] = []
    for key in sorted(cells):
        idxs = cells[key]
        if not idxs:
            raise ValueError(f"empty (class, snr) cell {key}")
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed % 2**64,) + tuple(k % 2**64 for k in key)))
        order = rng.permutation(len(idxs))
        n_test = _round_half_up(spec.test_frac * len(idxs))
        m = len(idxs) - n_test
        n_lab = _round_half_up(spec.labeled_frac * m)
        for rank, j in enumerate(order):
            rec = dataset.records[idxs[j]]
            if rank < n_test:
                test.append(replace(rec, iq=rec.iq))
            elif rank < n_test + n_lab:
                labeled.append(replace(rec, labeled=True))
            else:
                unlabeled.append(replace(rec, labeled=False))
    return (
        dataset.with_records(labeled),
        dataset.with_records(unlabeled),
        dataset.with_records(test),
    )


# -- batching ---------------------------------------------------------------

def batch_iter(records: Sequence[SignalRecord], batch_size: int, seed: int,
               drop_last: bool = True) -> Iterator[tuple[Tensor, np.ndarray, np.ndarray]]:
    """Shuffled minibatches as (signals B x 2 x L, class indices, snr tags).

    Training mode (``drop_last=True``) discards a trailing short batch so
    labeled/unlabeled batches stay the same size; evaluation keeps it and
    covers every record exactly once.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = len(records)
    rng = np.random.default_rng(np.random.SeedSequence(seed % 2**64))
    order = rng.permutation(n)
    stop = (n // batch_size) * batch_size if drop_last else n
    for start in range(0, stop, batch_size):
        idxs = order[start:start + batch_size]
        sigs = np.stack([records[i].iq for i in idxs]).astype(np.float32)
        classes = np.array([records[i].class_idx for i in idxs], dtype=np.int64)
        snrs = np.array([records[i].snr_db for i in idxs], dtype=np.float32)
        yield Tensor(sigs), classes, snrs


def one_hot(class_idx: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((len(class_idx), num_classes), dtype=np.float32)
    out[np.arange(len(class_idx)), class_idx] = 1.0
    return out
