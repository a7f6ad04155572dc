"""Canonical byte encoding used for every digest and signature.

Layout rules:

* integers: signed 64-bit little-endian;
* numbers: IEEE-754 binary64 little-endian;
* strings: UTF-8, prefixed with their byte length as unsigned 64-bit LE;
* raw bytes: length-prefixed like strings;
* booleans: integer 0 or 1;
* sequences: element count (unsigned 64-bit LE) followed by each element.

Composite values are encoded field by field in declaration order. Nothing
here carries type tags, so both sides of a digest must agree on the layout,
which the schema (or the calling type) fixes.
"""

from __future__ import annotations

import hashlib
import struct
from collections.abc import Iterable, Sequence

DIGEST_SIZE = 32


def digest(data: bytes) -> bytes:
    """SHA-256 of ``data``."""
    return hashlib.sha256(data).digest()


def enc_int(value: int) -> bytes:
    return struct.pack("<q", value)


def enc_uint(value: int) -> bytes:
    return struct.pack("<Q", value)


def enc_float(value: float) -> bytes:
    return struct.pack("<d", float(value))


def enc_bytes(value: bytes) -> bytes:
    return enc_uint(len(value)) + bytes(value)


def enc_str(value: str) -> bytes:
    return enc_bytes(value.encode("utf-8"))


def enc_bool(value: bool) -> bytes:
    return enc_int(1 if value else 0)


def enc_floats(values: Sequence[float]) -> bytes:
    return enc_uint(len(values)) + b"".join(enc_float(v) for v in values)


def enc_ints(values: Sequence[int]) -> bytes:
    return enc_uint(len(values)) + b"".join(enc_int(v) for v in values)


def enc_seq(parts: Iterable[bytes]) -> bytes:
    parts = list(parts)
    return enc_uint(len(parts)) + b"".join(parts)
