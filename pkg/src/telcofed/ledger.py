"""Signed, hash-chained audit ledger.

Entry hash: ``SHA-256(enc_int(index) || enc_int(timestamp) || enc_str(type) ||
enc_bytes(payload_digest) || enc_bytes(prev_hash))`` with the canonical
layout from :mod:`telcofed.codec`. The genesis ``prev_hash`` is
``SHA-256(b"GENESIS")``. Each entry carries an Ed25519 signature over its
entry hash and the id of the signing key.

Export format, one entry per line, single spaces, lowercase hex::

    <index> <timestamp> <type> <payload_digest> <prev_hash> <entry_hash> <signer> <signature>
"""

from __future__ import annotations

import re
import threading
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from telcofed import codec
from telcofed.crypto import Signer, verify_signature
from telcofed.errors import TelcoFedError

ENTRY_TYPES = (
    "registration",
    "invocation",
    "insight",
    "round-start",
    "update-commitment",
    "round-result",
    "round-abort",
    "authorization-denied",
    "violation",
)

GENESIS_HASH = codec.digest(b"GENESIS")

_LINE_RE = re.compile(
    r"(0|[1-9][0-9]*) (0|[1-9][0-9]*) ([a-z\-]+) "
    r"([0-9a-f]{64}) ([0-9a-f]{64}) ([0-9a-f]{64}) ([0-9a-f]{16}) ([0-9a-f]{128})"
)


class LedgerError(TelcoFedError):
    pass


class TimestampRegressionError(LedgerError, ValueError):
    pass


class LedgerImportError(LedgerError, ValueError):
    """Malformed export document; ``index`` is the 0-based offending line."""

    def __init__(self, index: int, message: str) -> None:
        self.index = index
        super().__init__(f"line {index}: {message}")


class LedgerVerificationError(LedgerError):
    def __init__(self, index: int) -> None:
        self.index = index
        super().__init__(f"chain verification failed at entry {index}")


@dataclass(frozen=True)
class LedgerEntry:
    index: int
    timestamp: int
    entry_type: str
    payload_digest: bytes
    prev_hash: bytes
    entry_hash: bytes
    signer: str
    signature: bytes

    def to_line(self) -> str:
        return " ".join(
            (
                str(self.index),
                str(self.timestamp),
                self.entry_type,
                self.payload_digest.hex(),
                self.prev_hash.hex(),
                self.entry_hash.hex(),
                self.signer,
                self.signature.hex(),
            )
        )


def compute_entry_hash(
    index: int, timestamp: int, entry_type: str, payload_digest: bytes, prev_hash: bytes
) -> bytes:
    return codec.digest(
        codec.enc_int(index)
        + codec.enc_int(timestamp)
        + codec.enc_str(entry_type)
        + codec.enc_bytes(payload_digest)
        + codec.enc_bytes(prev_hash)
    )


def verify_entry(entry: LedgerEntry, public_key: bytes) -> bool:
    """Signature check over the entry hash."""
    return verify_signature(public_key, entry.entry_hash, entry.signature)


def verify_chain(entries: Sequence[LedgerEntry], keys: Mapping[str, bytes]) -> int | None:
    """``None`` when the chain is intact, else the first bad position.

    ``keys`` maps signer key ids to raw public keys.
    """
    prev = GENESIS_HASH
    last_ts = None
    for pos, e in enumerate(entries):
        if e.index != pos or e.prev_hash != prev or e.entry_type not in ENTRY_TYPES:
            return pos
        if last_ts is not None and e.timestamp < last_ts:
            return pos
        expected = compute_entry_hash(e.index, e.timestamp, e.entry_type, e.payload_digest, e.prev_hash)
        if expected != e.entry_hash:
            return pos
        public_key = keys.get(e.signer)
        if public_key is None or not verify_entry(e, public_key):
            return pos
        prev = e.entry_hash
        last_ts = e.timestamp
    return None


def export_ledger(entries: Iterable[LedgerEntry]) -> str:
    return "".join(e.to_line() + "\n" for e in entries)


def parse_line(line: str, pos: int) -> LedgerEntry:
    m = _LINE_RE.fullmatch(line)
    if m is None:
        raise LedgerImportError(pos, "malformed entry")
    index, ts, etype, payload, prev, ehash, signer, sig = m.groups()
    if etype not in ENTRY_TYPES:
        raise LedgerImportError(pos, f"unknown entry type {etype!r}")
    return LedgerEntry(
        index=int(index),
        timestamp=int(ts),
        entry_type=etype,
        payload_digest=bytes.fromhex(payload),
        prev_hash=bytes.fromhex(prev),
        entry_hash=bytes.fromhex(ehash),
        signer=signer,
        signature=bytes.fromhex(sig),
    )


def import_ledger(text: str, keys: Mapping[str, bytes] | None = None) -> list[LedgerEntry]:
    """Parse an export document.

    Every line must be newline-terminated and in canonical form. When
    ``keys`` is given, the parsed chain is also verified and a
    :class:`LedgerVerificationError` names the first bad entry.
    """
    if not text:
        return []
    if not text.endswith("\n"):
        raise LedgerImportError(text.count("\n"), "truncated entry (missing line terminator)")
    entries = [parse_line(line, pos) for pos, line in enumerate(text[:-1].split("\n"))]
    if keys is not None:
        bad = verify_chain(entries, keys)
        if bad is not None:
            raise LedgerVerificationError(bad)
    return entries


@dataclass
class Ledger:
    """Append-only ledger; one per scenario run."""

    entries: list[LedgerEntry] = field(default_factory=list)
    keys: dict[str, bytes] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add_key(self, signer: Signer) -> None:
        self.keys[signer.key_id] = signer.public_key

    def append(self, payload: bytes, entry_type: str, signer: Signer, timestamp: int) -> LedgerEntry:
        if entry_type not in ENTRY_TYPES:
            raise ValueError(f"unknown entry type {entry_type!r}")
        with self._lock:
            if self.entries and timestamp < self.entries[-1].timestamp:
                raise TimestampRegressionError(
                    f"timestamp {timestamp} precedes last entry at {self.entries[-1].timestamp}"
                )
            index = len(self.entries)
            prev = self.entries[-1].entry_hash if self.entries else GENESIS_HASH
            pdigest = codec.digest(payload)
            ehash = compute_entry_hash(index, timestamp, entry_type, pdigest, prev)
            entry = LedgerEntry(index, timestamp, entry_type, pdigest, prev, ehash, signer.key_id, signer.sign(ehash))
            self.entries.append(entry)
            self.keys.setdefault(signer.key_id, signer.public_key)
        return entry

    def verify(self) -> int | None:
        return verify_chain(self.entries, self.keys)

    def export(self) -> str:
        bad = self.verify()
        if bad is not None:
            raise LedgerVerificationError(bad)
        return export_ledger(self.entries)

    def export_keys(self) -> str:
        return "".join(f"{kid} {pk.hex()}\n" for kid, pk in sorted(self.keys.items()))

    def __len__(self) -> int:
        return len(self.entries)


def parse_keys(text: str) -> dict[str, bytes]:
    keys = {}
    for line in text.splitlines():
        if line.strip():
            kid, pk = line.split()
            keys[kid] = bytes.fromhex(pk)
    return keys
