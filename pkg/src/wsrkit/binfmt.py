"""Shared layout for the toolkit's binary files.

Both file formats use the same container: a 4-byte magic, a u32
little-endian version, a u64 little-endian JSON header length, the JSON
header bytes, then a format-specific payload. Each failure mode gets its
own exception type so callers can tell a wrong file apart from a damaged
one.
"""

from __future__ import annotations

import json
import struct


class FileFormatError(Exception):
    """Base class for all binary-format failures."""


class BadMagicError(FileFormatError):
    pass


class VersionMismatchError(FileFormatError):
    pass


class TruncatedFileError(FileFormatError):
    pass


class CountMismatchError(FileFormatError):
    pass


class ParamMismatchError(FileFormatError):
    """Checkpoint parameter name or shape disagrees with its config."""


_PREFIX = struct.Struct("<4sIQ")


def write_container(path, magic: bytes, version: int, header: dict, payload: bytes) -> None:
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(magic, version, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def read_container(path, magic: bytes, version: int) -> tuple[dict, bytes]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _PREFIX.size:
        raise TruncatedFileError(f"{path}: file shorter than the fixed prefix")
    got_magic, got_version, header_len = _PREFIX.unpack_from(raw)
    if got_magic != magic:
        raise BadMagicError(f"{path}: magic {got_magic!r}, expected {magic!r}")
    if got_version != version:
        raise VersionMismatchError(f"{path}: version {got_version}, expected {version}")
    header_end = _PREFIX.size + header_len
    if len(raw) < header_end:
        raise TruncatedFileError(f"{path}: header runs past end of file")
    try:
        header = json.loads(raw[_PREFIX.size:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedFileError(f"{path}: unreadable JSON header: {exc}") from exc
    return header, raw[header_end:]
