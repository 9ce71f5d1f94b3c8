"""Model checkpoints (WNET-v1).

Container per :mod:`wsrkit.binfmt` with magic ``WNET``. The JSON header
holds the architecture config and a parameter manifest (name, shape,
byte offset into the payload); the payload is the concatenated float32
little-endian parameter buffers in manifest order. Round-trips are
bit-exact.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor
from .binfmt import (
    CountMismatchError,
    ParamMismatchError,
    TruncatedFileError,
    read_container,
    write_container,
)
from .drsn import DrsnConfig, DrsnModel, param_shapes

MAGIC = b"WNET"
VERSION = 1


def save_checkpoint(model: DrsnModel, path) -> None:
    manifest = []
    chunks = []
    offset = 0
    for name, p in model.params.items():
        buf = np.ascontiguousarray(p.data, dtype="<f4").tobytes()
        manifest.append({"name": name, "shape": list(p.data.shape), "offset": offset})
        chunks.append(buf)
        offset += len(buf)
    header = {"config": model.config.to_dict(), "params": manifest}
    write_container(path, MAGIC, VERSION, header, b"".join(chunks))


def load_checkpoint(path) -> DrsnModel:
    header, payload = read_container(path, MAGIC, VERSION)
    try:
        config = DrsnConfig.from_dict(header["config"])
        manifest = header["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParamMismatchError(f"{path}: malformed checkpoint header: {exc}") from exc

    expected = param_shapes(config)
    names = [entry["name"] for entry in manifest]
    if names != list(expected):
        raise ParamMismatchError(
            f"{path}: parameter manifest {names} does not match the config's layout")

    params: dict[str, Tensor] = {}
    for entry in manifest:
        name = entry["name"]
        shape = tuple(int(v) for v in entry["shape"])
        if shape != expected[name]:
            raise ParamMismatchError(
                f"{path}: parameter {name!r} has shape {shape}, config requires {expected[name]}")
        offset = int(entry["offset"])
        nbytes = int(np.prod(shape)) * 4
        if offset < 0 or offset + nbytes > len(payload):
            raise TruncatedFileError(f"{path}: parameter {name!r} payload runs past end of file")
        data = np.frombuffer(payload, dtype="<f4", count=int(np.prod(shape)),
                             offset=offset).reshape(shape)
        params[name] = Tensor(data.copy(), requires_grad=True)

    total = sum(int(np.prod(e["shape"])) * 4 for e in manifest)
    if total != len(payload):
        raise CountMismatchError(
            f"{path}: payload holds {len(payload)} bytes, manifest accounts for {total}")
    return DrsnModel(config, params)
