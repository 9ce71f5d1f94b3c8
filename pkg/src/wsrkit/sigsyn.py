"""Synthetic digital-modulation IQ generator.

Each record is built the same way: draw random symbols, modulate to a
complex baseband waveform, pass it through a flat channel (gain, carrier
frequency/phase offset, additive white Gaussian noise), crop a random
window and normalize it to unit average power. Generation conventions:

* linear classes (PSK/QAM/PAM) use Gray-mapped constellations scaled to
  unit mean power and root-raised-cosine pulse shaping;
* GFSK/CPFSK integrate phase at modulation index 0.5 (GFSK smooths the
  frequency pulse with a BT=0.35 Gaussian) and have exactly unit envelope;
* noise with total power ``sigma^2 = |h|^2 / 10^(snr_db/10)`` is split
  evenly between the I and Q components, so the realized SNR matches the
  requested one;
* ``snr_db >= 100`` is treated as the noiseless limit.

Every record is a pure function of (spec, class, snr, record seed), so
cells can be generated in any order, or in parallel, without changing the
output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dataio import Dataset, DatasetHeader, SignalRecord

SUPPORTED_CLASSES = ("BPSK", "QPSK", "8PSK", "QAM16", "QAM64", "PAM4", "GFSK", "CPFSK")

_LINEAR = {"BPSK", "QPSK", "8PSK", "QAM16", "QAM64", "PAM4"}
_FSK = {"GFSK", "CPFSK"}

RRC_SPAN_SYMBOLS = 10      # filter half-support per side is span/2 symbols
GAUSS_BT = 0.35            # GFSK frequency-pulse bandwidth-time product
FSK_MOD_INDEX = 0.5
NOISELESS_SNR_DB = 100.0


@dataclass(frozen=True)
class ChannelConfig:
    """Flat channel: complex gain, carrier offsets, additive noise."""

    snr_db: float
    channel_gain: complex = 1 + 0j
    cfo_norm: float = 0.0          # carrier frequency offset, cycles/sample
    phase: float | None = None     # None draws uniform on [0, 2pi)

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if abs(self.channel_gain) <= 0:
            raise ValueError("channel gain must be nonzero")


@dataclass(frozen=True)
class SynthSpec:
    """What to generate: which classes, which SNRs, how many of each."""

    classes: tuple[str, ...]
    per_cell: int
    snr_grid: tuple[float, ...] = tuple(float(s) for s in range(-6, 13, 2))
    window_len: int = 128
    samples_per_symbol: int = 8
    rrc_rolloff: float = 0.35
    cfo_max: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.classes:
            raise ValueError("at least one modulation class is required")
        unknown = [c for c in self.classes if c not in SUPPORTED_CLASSES]
        if unknown:
            raise ValueError(f"unsupported classes: {unknown}")
        if self.per_cell < 1:
            raise ValueError("per_cell must be >= 1")
        if not 0.0 < self.rrc_rolloff <= 1.0:
            raise ValueError("rrc_rolloff must lie in (0, 1]")
        if self.samples_per_symbol < 2:
            raise ValueError("samples_per_symbol must be >= 2")
        if self.window_len < 8:
            raise ValueError("window_len must be >= 8")


# -- constellations ----------------------------------------------------------

def _gray(n: int) -> int:
    return n ^ (n >> 1)


def _pam_levels(bits: int) -> np.ndarray:
    """Gray-ordered amplitude levels -M+1, ..., M-1 for M = 2**bits."""
    m = 1 << bits
    levels = np.arange(-(m - 1), m, 2, dtype=np.float64)
    out = np.empty(m)
    for idx in range(m):
        out[idx] = levels[_gray(idx)]
    return out


@lru_cache(maxsize=None)
def constellation(cls: str) -> np.ndarray:
    """Unit-mean-power constellation points, Gray-mapped by symbol index.

    Only defined for the linear classes; the FSK classes are generated by
    phase integration and have no point set.
    """
    if cls == "BPSK":
        pts = np.array([1.0, -1.0], dtype=np.complex128)
    elif cls == "QPSK":
        pts = np.exp(1j * (2 * np.pi * np.array([_gray(i) for i in range(4)]) / 4 + np.pi / 4))
    elif cls == "8PSK":
        pts = np.exp(1j * 2 * np.pi * np.array([_gray(i) for i in range(8)]) / 8)
    elif cls == "PAM4":
        pts = _pam_levels(2).astype(np.complex128)
    elif cls == "QAM16":
        re = _pam_levels(2)
        pts = (re[:, None] + 1j * re[None, :]).reshape(-1)
    elif cls == "QAM64":
        re = _pam_levels(3)
        pts = (re[:, None] + 1j * re[None, :]).reshape(-1)
    else:
        raise ValueError(f"unknown linear modulation {cls!r}")
    power = np.mean(np.abs(pts) ** 2)
    return pts / np.sqrt(power)


@lru_cache(maxsize=None)
def _rrc_taps(sps: int, rolloff: float) -> np.ndarray:
    """Root-raised-cosine impulse response, unit energy."""
    n = RRC_SPAN_SYMBOLS * sps
    t = (np.arange(-n // 2, n // 2 + 1)) / sps
    beta = rolloff
    taps = np.empty_like(t)
    for i, ti in enumerate(t):
        if abs(ti) < 1e-12:
            taps[i] = 1.0 - beta + 4.0 * beta / np.pi
        elif abs(abs(4.0 * beta * ti) - 1.0) < 1e-9:
            taps[i] = (beta / np.sqrt(2.0)) * (
                (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
                + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta)))
        else:
            num = np.sin(np.pi * ti * (1.0 - beta)) + 4.0 * beta * ti * np.cos(np.pi * ti * (1.0 + beta))
            taps[i] = num / (np.pi * ti * (1.0 - (4.0 * beta * ti) ** 2))
    return taps / np.sqrt(np.sum(taps ** 2))


@lru_cache(maxsize=None)
def _gauss_taps(sps: int) -> np.ndarray:
    """Gaussian frequency pulse for GFSK, normalized to unit sum."""
    sigma = np.sqrt(np.log(2.0)) / (2.0 * np.pi * GAUSS_BT) * sps
    half = 2 * sps
    n = np.arange(-half, half + 1)
    g = np.exp(-0.5 * (n / sigma) ** 2)
    return g / g.sum()


def modulate(cls: str, symbols: np.ndarray, spec: SynthSpec) -> np.ndarray:
    """Symbol indices -> complex baseband waveform at spec.samples_per_symbol."""
    sps = spec.samples_per_symbol
    if cls in _LINEAR:
        pts = constellation(cls)
        if symbols.min() < 0 or symbols.max() >= len(pts):
            raise ValueError(f"symbol index out of range for {cls}")
        upsampled = np.zeros(len(symbols) * sps, dtype=np.complex128)
        upsampled[::sps] = pts[symbols]
        return np.convolve(upsampled, _rrc_taps(sps, spec.rrc_rolloff), mode="same")
    if cls in _FSK:
        if symbols.min() < 0 or symbols.max() >= 2:
            raise ValueError(f"symbol index out of range for {cls}")
        nrz = np.repeat(2.0 * symbols - 1.0, sps)
        if cls == "GFSK":
            nrz = np.convolve(nrz, _gauss_taps(sps), mode="same")
        phase = np.cumsum(np.pi * FSK_MOD_INDEX * nrz / sps)
        return np.exp(1j * phase)
    raise ValueError(f"unknown modulation class {cls!r}")


# -- channel -----------------------------------------------------------------

def apply_channel(signal: np.ndarray, cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """Rotate by gain/CFO/phase and add circular Gaussian noise.

    The input must have unit average power; total noise power is then
    |h|^2 / 10^(snr_db/10), split evenly between components.
    """
    if signal.size == 0:
        raise ValueError("empty signal")
    n = signal.size
    phase = rng.uniform(0.0, 2.0 * np.pi) if cfg.phase is None else cfg.phase
    l = np.arange(n)
    rotated = cfg.channel_gain * np.exp(1j * (2.0 * np.pi * cfg.cfo_norm * l + phase)) * signal
    if cfg.snr_db >= NOISELESS_SNR_DB:
        return rotated
    sigma2 = abs(cfg.channel_gain) ** 2 / (10.0 ** (cfg.snr_db / 10.0))
    comps = rng.standard_normal((2, n)) * np.sqrt(sigma2 / 2.0)
    return rotated + comps[0] + 1j * comps[1]


# -- records and datasets ----------------------------------------------------

def _record_rng(spec: SynthSpec, cls: str, snr_db: float, seed: int) -> np.random.Generator:
    """RNG keyed on (spec seed, class id, snr, record seed); order-free."""
    cls_id = SUPPORTED_CLASSES.index(cls)
    snr_key = int(round(snr_db * 1000)) % 2**64
    return np.random.default_rng(
        np.random.SeedSequence((spec.seed % 2**64, cls_id, snr_key, seed % 2**64)))


def synth_record(cls: str, snr_db: float, spec: SynthSpec, seed: int) -> SignalRecord:
    """One windowed, unit-power IQ record.

    Draw order is fixed: symbols, carrier phase, CFO, channel noise, crop
    offset. Crops avoid the pulse-shaping transients at both ends.
    """
    if cls not in SUPPORTED_CLASSES:
        raise ValueError(f"unknown modulation class {cls!r}")
    if cls not in spec.classes:
        raise ValueError(f"{cls} is not part of this spec's class list {spec.classes}")
    rng = _record_rng(spec, cls, snr_db, seed)
    sps = spec.samples_per_symbol
    edge = (RRC_SPAN_SYMBOLS * sps) // 2
    length = spec.window_len
    n_sym = math.ceil((length + 2 * edge + sps) / sps)
    order = 2 if cls in _FSK else len(constellation(cls))
    symbols = rng.integers(0, order, size=n_sym)

    wave = modulate(cls, symbols, spec)
    wave = wave / np.sqrt(np.mean(np.abs(wave) ** 2))

    cfg = ChannelConfig(
        snr_db=snr_db,
        phase=rng.uniform(0.0, 2.0 * np.pi),
        cfo_norm=rng.uniform(-spec.cfo_max, spec.cfo_max),
    )
    received = apply_channel(wave, cfg, rng)

    last_start = received.size - length - edge
    if last_start < edge:
        raise ValueError(f"window of {length} samples exceeds the generated waveform")
    start = int(rng.integers(edge, last_start + 1))
    window = received[start:start + length]
    window = window / np.sqrt(np.mean(np.abs(window) ** 2))

    iq = np.stack([window.real, window.imag]).astype(np.float32)
    return SignalRecord(iq=iq, class_idx=spec.classes.index(cls), snr_db=float(snr_db))


def synth_dataset(spec: SynthSpec, max_records: int = 2_000_000) -> Dataset:
    """Balanced grid of records: every (class, snr) cell gets per_cell."""
    total = len(spec.classes) * len(spec.snr_grid) * spec.per_cell
    if total > max_records:
        raise ValueError(f"{total} records exceed the cap of {max_records}")
    records = []
    for cls in spec.classes:
        for snr in spec.snr_grid:
            for i in range(spec.per_cell):
                records.append(synth_record(cls, snr, spec, seed=i))
    header = DatasetHeader(
        version=1,
        length=spec.window_len,
        class_names=list(spec.classes),
        record_count=total,
        snr_grid=[float(s) for s in spec.snr_grid],
        provenance=f"wsrkit-synth seed={spec.seed}",
    )
    return Dataset(header, records)
