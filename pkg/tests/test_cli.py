"""Command-line behaviour, driven in-process through ``main``."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from telcofed.cli import EXIT_OK, EXIT_VALIDATION, EXIT_VERIFICATION, OUTPUT_FILES, main

ROOT = Path(__file__).resolve().parents[1]
REFERENCE = ROOT / "scenarios" / "reference.yaml"
FAULT = ROOT / "scenarios" / "fault_injection.yaml"


@pytest.fixture(scope="module")
def reference_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("ref")
    code = main(["run", "--scenario", str(REFERENCE), "--out", str(out)])
    return code, out


def test_run_reference_writes_outputs(reference_run):
    code, out = reference_run
    assert code == EXIT_OK
    for name in (*OUTPUT_FILES, "ledger.keys"):
        assert (out / name).is_file(), name
    report = json.loads((out / "report.json").read_text())
    assert report["violation_count"] == 0
    assert report["tool"] == "telcofed"
    header = (out / "rounds.csv").read_text().splitlines()[0]
    assert "round" in header


def test_run_fault_injection_exits_nonzero(tmp_path, capsys):
    code = main(["run", "--scenario", str(FAULT), "--out", str(tmp_path)])
    assert code != EXIT_OK
    assert json.loads((tmp_path / "report.json").read_text())["violation_count"] > 0
    assert "sovereignty violation" in capsys.readouterr().err


def test_seed_override_changes_digest(reference_run, tmp_path):
    _, out = reference_run
    assert main(["run", "--scenario", str(REFERENCE), "--seed", "99", "--out", str(tmp_path)]) == EXIT_OK
    a = json.loads((out / "report.json").read_text())
    b = json.loads((tmp_path / "report.json").read_text())
    assert b["seed"] == 99
    assert a["report_digest"] != b["report_digest"]


def test_validate_ok_and_bad(tmp_path, capsys):
    assert main(["validate", "--scenario", str(REFERENCE)]) == EXIT_OK
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nseed: 1\noperators: []\n")
    assert main(["validate", "--scenario", str(bad)]) == EXIT_VALIDATION
    assert "bad.yaml" in capsys.readouterr().err


def test_ledger_verify_intact(reference_run, capsys):
    _, out = reference_run
    assert main(["ledger", "verify", str(out / "ledger.txt")]) == EXIT_OK
    assert capsys.readouterr().out.startswith("OK:")


def test_ledger_verify_tampered_reports_index(reference_run, tmp_path, capsys):
    _, out = reference_run
    lines = (out / "ledger.txt").read_text().splitlines(keepends=True)
    target = 3
    line = lines[target]
    # Flip one hex digit near the end of the line (inside the signature).
    pos = len(line.rstrip("\n")) - 5
    flipped = "0" if line[pos] != "0" else "1"
    lines[target] = line[:pos] + flipped + line[pos + 1 :]
    tampered = tmp_path / "ledger.txt"
    tampered.write_text("".join(lines))
    keys = out / "ledger.keys"
    assert main(["ledger", "verify", str(tampered), "--keys", str(keys)]) == EXIT_VERIFICATION
    assert f"first bad index {target}" in capsys.readouterr().out


def test_ledger_verify_non_utf8_byte(reference_run, tmp_path, capsys):
    _, out = reference_run
    data = bytearray((out / "ledger.txt").read_bytes())
    first_len = data.index(b"\n") + 1
    data[first_len + 10] = 0xFF
    tampered = tmp_path / "ledger.txt"
    tampered.write_bytes(bytes(data))
    code = main(["ledger", "verify", str(tampered), "--keys", str(out / "ledger.keys")])
    assert code == EXIT_VERIFICATION
    assert "first bad index 1" in capsys.readouterr().out


def test_ledger_verify_empty(tmp_path):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert main(["ledger", "verify", str(empty)]) == EXIT_OK


def test_certify_reference_and_adversarial(tmp_path):
    assert main(["certify", "--kind", "sla-monitor", "--out", str(tmp_path / "a")]) == EXIT_OK
    d = json.loads((tmp_path / "a" / "certification.json").read_text())
    assert d["overall"] == "pass"
    code = main(["certify", "--kind", "anomaly-detector", "--impl", "raw-exporter", "--out", str(tmp_path / "b")])
    assert code == EXIT_VERIFICATION
    d = json.loads((tmp_path / "b" / "certification.json").read_text())
    assert d["tests"]["scope-compliance"]["verdict"] == "fail"


def test_certify_unknown_suite_key(tmp_path):
    suite = tmp_path / "suite.yaml"
    suite.write_text("bogus: 1\n")
    code = main(["certify", "--kind", "sla-monitor", "--suite", str(suite), "--out", str(tmp_path)])
    assert code == EXIT_VALIDATION


@pytest.mark.parametrize(
    "argv", [[], ["run"], ["validate"], ["ledger"], ["ledger", "verify"], ["certify"]]
)
def test_help_for_every_command(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main([*argv, "--help"])
    assert exc.value.code == 0
    assert "usage:" in capsys.readouterr().out
