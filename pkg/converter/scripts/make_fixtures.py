#!/usr/bin/env python3
"""Build the converter's test fixtures.

Produces three pickles with identical content in the encodings the
converter must accept, plus an expected-values JSON:

  proto2.pkl    protocol 2 as written by Python 3 (array bytes go through
                a latin-1 encode step)
  proto4.pkl    protocol 4 (framed, with STACK_GLOBAL and BINBYTES8)
  py2style.pkl  handcrafted stream matching Python 2 cPickle output
                (byte-string keys, GLOBAL numpy.core.multiarray, BINSTRING
                payloads) -- the encoding of the original archives

Run from the converter directory:  python3 scripts/make_fixtures.py
"""

import json
import pickle
import struct
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures"

CELLS = [
    ("BPSK", -6, 5),
    ("BPSK", 0, 4),
    ("QPSK", -6, 3),
    ("QPSK", 0, 6),
    ("AM-SSB", 0, 2),   # analog class, must convert with a flag in the summary
]
FRAME_LEN = 16


def build_data():
    rng = np.random.default_rng(20240817)
    return {
        (mod, snr): rng.normal(scale=2.0, size=(n, 2, FRAME_LEN)).astype(np.float32)
        for mod, snr, n in CELLS
    }


def py2_style_pickle(data: dict) -> bytes:
    """Emit the dict the way Python 2 cPickle protocol 2 did."""
    out = bytearray()
    out += b"\x80\x02"          # PROTO 2
    out += b"}"                 # EMPTY_DICT
    out += b"("                 # MARK

    def put_int(v: int):
        if 0 <= v < 256:
            out.extend(b"K" + struct.pack("<B", v))
        else:
            out.extend(b"J" + struct.pack("<i", v))

    def put_str(s: bytes):
        if len(s) < 256:
            out.extend(b"U" + struct.pack("<B", len(s)) + s)
        else:
            out.extend(b"T" + struct.pack("<I", len(s)) + s)

    for (mod, snr), arr in data.items():
        put_str(mod.encode("ascii"))
        put_int(snr)
        out.extend(b"\x86")     # TUPLE2 -> key

        out.extend(b"cnumpy.core.multiarray\n_reconstruct\n")
        out.extend(b"cnumpy\nndarray\n")
        put_int(0)
        out.extend(b"\x85")     # TUPLE1
        put_str(b"b")
        out.extend(b"\x87R")    # TUPLE3, REDUCE -> ndarray stub
        out.extend(b"(")        # MARK for the state tuple
        put_int(1)
        out.extend(b"(")        # shape tuple
        for dim in arr.shape:
            put_int(dim)
        out.extend(b"t")
        out.extend(b"cnumpy\ndtype\n")
        put_str(b"f4")
        put_int(0)
        put_int(1)
        out.extend(b"\x87R")    # dtype REDUCE
        out.extend(b"(")
        put_int(3)
        put_str(b"<")
        out.extend(b"NNN")
        out.extend(b"J" + struct.pack("<i", -1))
        out.extend(b"J" + struct.pack("<i", -1))
        put_int(0)
        out.extend(b"tb")       # TUPLE, BUILD -> little-endian f4 dtype
        out.extend(b"\x89")     # NEWFALSE (fortran order)
        put_str(arr.tobytes())
        out.extend(b"tb")       # state TUPLE, BUILD -> ndarray
    out.extend(b"u")            # SETITEMS
    out.extend(b".")            # STOP
    return bytes(out)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    data = build_data()

    (OUT / "proto2.pkl").write_bytes(pickle.dumps(data, protocol=2))
    (OUT / "proto4.pkl").write_bytes(pickle.dumps(data, protocol=4))
    (OUT / "py2style.pkl").write_bytes(py2_style_pickle(data))

    # verify the handcrafted stream loads back identically
    again = pickle.loads((OUT / "py2style.pkl").read_bytes(), encoding="latin1")
    for key, arr in data.items():
        k2 = (key[0].encode() if isinstance(next(iter(again)), tuple) and
              isinstance(next(iter(again.keys()))[0], bytes) else key[0], key[1])
        match = again.get(key) if key in again else again.get(k2)
        assert match is not None and np.array_equal(match, arr), f"round trip failed for {key}"

    expected = {
        "frame_length": FRAME_LEN,
        "cells": [
            {"modulation": mod, "snr": snr, "count": n} for mod, snr, n in CELLS
        ],
        "total": sum(n for _, _, n in CELLS),
        "samples": [],
    }
    # freeze a few exact values for the pickle readers to reproduce
    for (mod, snr), arr in list(data.items())[:3]:
        expected["samples"].append({
            "modulation": mod,
            "snr": snr,
            "row": 0,
            "values": [float(v) for v in arr[0].reshape(-1)[:6]],
        })
    (OUT / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
