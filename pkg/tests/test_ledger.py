from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from telcofed.codec import digest
from telcofed.crypto import Signer
from telcofed.ledger import (
    GENESIS_HASH,
    Ledger,
    LedgerImportError,
    LedgerVerificationError,
    TimestampRegressionError,
    import_ledger,
    verify_chain,
    verify_entry,
)

from helpers import first_bad_index, make_ledger, mutate_byte

SIGNER = Signer.from_seed(1, "ledger")


def test_genesis_prev_hash():
    ledger = Ledger()
    e = ledger.append(b"x", "registration", SIGNER, 0)
    assert e.prev_hash == GENESIS_HASH == digest(b"GENESIS")
    assert e.index == 0


def test_chain_links():
    ledger = Ledger()
    a = ledger.append(b"a", "invocation", SIGNER, 0)
    b = ledger.append(b"b", "insight", SIGNER, 0)
    assert b.prev_hash == a.entry_hash and b.index == 1


def test_clock_regression_rejected():
    ledger = Ledger()
    ledger.append(b"a", "invocation", SIGNER, 5)
    with pytest.raises(TimestampRegressionError):
        ledger.append(b"b", "invocation", SIGNER, 4)
    assert len(ledger) == 1


def test_unknown_entry_type():
    with pytest.raises(ValueError):
        Ledger().append(b"a", "gossip", SIGNER, 0)


def test_untampered_ledger_verifies():
    assert make_ledger(100).verify() is None


def test_payload_byte_flip_detected_at_entry():
    ledger = make_ledger(100)
    entries = list(ledger.entries)
    pd = bytearray(entries[42].payload_digest)
    pd[7] ^= 0x80
    entries[42] = replace(entries[42], payload_digest=bytes(pd))
    assert verify_chain(entries, ledger.keys) == 42


def test_deleted_entry_detected():
    ledger = make_ledger(30)
    entries = ledger.entries[:10] + ledger.entries[11:]
    assert verify_chain(entries, ledger.keys) == 10


def test_verify_entry_keys():
    ledger = make_ledger(4)
    e = ledger.entries[0]
    assert verify_entry(e, ledger.keys[e.signer])
    assert not verify_entry(e, SIGNER.public_key)
    h = bytearray(e.entry_hash)
    h[0] ^= 1
    assert not verify_entry(replace(e, entry_hash=bytes(h)), ledger.keys[e.signer])


def test_unknown_signer_fails():
    ledger = make_ledger(5)
    keys = dict(ledger.keys)
    del keys[ledger.entries[3].signer]
    assert verify_chain(ledger.entries, keys) == 1


def test_export_import_round_trip():
    ledger = make_ledger(25)
    text = ledger.export()
    back = import_ledger(text, ledger.keys)
    assert back == ledger.entries
    assert "".join(e.to_line() + "\n" for e in back) == text


def test_truncated_export():
    text = make_ledger(10).export()
    cut = text[: text.index("\n", 2000) - 30]
    with pytest.raises(LedgerImportError) as exc:
        import_ledger(cut)
    assert exc.value.index == cut.count("\n")


def test_hand_edited_hex_digit():
    ledger = make_ledger(12)
    lines = ledger.export().splitlines(keepends=True)
    fields = lines[7].split(" ")
    fields[3] = ("0" if fields[3][0] != "0" else "1") + fields[3][1:]
    lines[7] = " ".join(fields)
    entries = import_ledger("".join(lines))
    assert verify_chain(entries, ledger.keys) == 7
    with pytest.raises(LedgerVerificationError) as exc:
        import_ledger("".join(lines), ledger.keys)
    assert exc.value.index == 7


def test_export_refuses_broken_chain():
    ledger = make_ledger(5)
    ledger.entries[2] = replace(ledger.entries[2], timestamp=999)
    with pytest.raises(LedgerVerificationError):
        ledger.export()


def test_verification_independent_of_verifier():
    ledger = make_ledger(8)
    text = ledger.export()
    keys = ledger.export_keys()
    from telcofed.ledger import parse_keys

    assert verify_chain(import_ledger(text), parse_keys(keys)) is None


def test_every_single_bit_flip_detected():
    ledger = make_ledger(3)
    data = ledger.export().encode()
    line_starts = [0] + [i + 1 for i, c in enumerate(data) if c == 0x0A][:-1]
    for pos in range(len(data)):
        line = max(i for i, s in enumerate(line_starts) if s <= pos)
        for bit in range(8):
            bad = mutate_byte(data, pos, data[pos] ^ (1 << bit))
            got = first_bad_index(bad.decode("utf-8", errors="replace"), ledger.keys)
            assert got is not None, (pos, bit)
            assert got == line, (pos, bit)


@given(st.data())
def test_random_byte_mutation_reports_line(data):
    ledger = make_ledger(20)
    raw = ledger.export().encode()
    pos = data.draw(st.integers(0, len(raw) - 1))
    value = data.draw(st.integers(0, 255).filter(lambda v: v != raw[pos]))
    line = raw[:pos].count(b"\n")
    bad = mutate_byte(raw, pos, value).decode("utf-8", errors="replace")
    assert first_bad_index(bad, ledger.keys) == line
