from pathlib import Path

import pytest

from telcofed.ledger import import_ledger, verify_chain
from telcofed.simnet import audit_trace, conservation_gaps, import_trace
from telcofed.simnet.scenario import ScenarioError, load_scenario, parse_scenario, run_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
REFERENCE = SCENARIOS / "reference.yaml"
FAULT = SCENARIOS / "fault_injection.yaml"

MINIMAL = """\
name: minimal
seed: 3
operators:
  - id: op-a
    telemetry:
      - key: cell.latency
        generator: {base: 20.0, noise_sigma: 1.0, length: 60}
  - id: op-b
federation:
  rounds: ROUNDS
  masking: MASKING
"""


def minimal(rounds=2, masking="true"):
    return MINIMAL.replace("ROUNDS", str(rounds)).replace("MASKING", masking)


def _error(text):
    with pytest.raises(ScenarioError) as exc:
        parse_scenario(text, "s.yaml")
    return exc.value


def test_shipped_scenarios_load():
    cfg = load_scenario(REFERENCE)
    assert [o.id for o in cfg.operators] == ["op-north", "op-south", "op-west"]
    assert load_scenario(FAULT).name == "fault-injection"


def test_masking_with_one_operator_names_federation():
    text = minimal().replace("  - id: op-b\n", "")
    err = _error(text)
    assert err.path == "federation.masking"
    assert err.line == 10
    assert "at least 2" in str(err)


def test_duplicate_operator_id_named():
    err = _error(minimal().replace("id: op-b", "id: op-a"))
    assert "'op-a'" in err.message
    assert err.path == "operators[1].id" and err.line == 8


def test_unknown_field_located():
    err = _error(minimal().replace("seed: 3", "seed: 3\nspeed: 4"))
    assert err.path == "speed" and err.line == 3


def test_wrong_type_located():
    err = _error(minimal(rounds="many"))
    assert err.path == "federation.rounds" and err.line == 10
    assert str(err).startswith("s.yaml:10: federation.rounds:")


def test_yaml_syntax_error_has_line():
    err = _error("operators: [\n  - id: x\n")
    assert err.line is not None


def test_reserved_and_unknown_references():
    assert _error(minimal().replace("id: op-b", "id: coordinator")).path == "operators[1].id"
    err = _error(minimal() + "agents:\n  - id: d\n    kind: anomaly-detector\n    operators: [op-z]\n"
                 "    scopes: [{operator: self, kind: kpi, key: cell.latency}]\n    input: {key: cell.latency}\n")
    assert "op-z" in err.message


def test_zero_rounds_keep_initial_model():
    result = run_scenario(parse_scenario(minimal(rounds=0)))
    assert result.report["final_version"] == 0
    assert len(result.losses) == 1 and result.rounds == []


def test_same_seed_same_digests():
    cfg = parse_scenario(minimal())
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert a.report_digest == b.report_digest and a.trace_digest == b.trace_digest


def test_seed_changes_trace():
    cfg = parse_scenario(minimal())
    assert run_scenario(cfg).trace_digest != run_scenario(cfg, seed=4).trace_digest


@pytest.fixture(scope="module")
def reference():
    return run_scenario(load_scenario(REFERENCE))


def test_reference_is_sovereign_and_converges(reference):
    assert reference.violation_count == 0
    assert reference.audited_violations == []
    assert reference.losses[-1] < 0.5 * reference.losses[0]
    assert reference.exit_code == 0


def test_reference_report_consistent(reference):
    r = reference.report
    assert r["violation_count"] == len(r["violations"]) == 0
    assert r["ledger_length"] == len(reference.ledger)
    assert r["final_version"] == reference.final_model.version == 5
    assert r["event_count"] == reference.sim.processed


def test_reference_congested_operator_skipped(reference):
    last = reference.rounds[-1]
    assert "op-south" not in last.participants
    assert all(r.status == "completed" for r in reference.rounds)


def test_reference_trace_invariants(reference):
    trace = import_trace(reference.sim.export_trace())
    times = [t.time for t in trace if t.type not in ("send", "block")]
    assert times == sorted(times)
    assert conservation_gaps(trace) == {}
    cross = {t.kind for t in trace if t.type == "send" and t.src != t.dst}
    assert cross <= {"insight", "model-update", "control"}


def test_reference_ledger_verifies(reference):
    text = reference.ledger.export()
    assert verify_chain(import_ledger(text), reference.ledger.keys) is None


def test_reference_detection_scored(reference):
    det = reference.detection["latency-detector"]
    assert det.recall == 1.0


def test_fault_injection_detected():
    result = run_scenario(load_scenario(FAULT))
    assert result.violation_count >= 1
    assert result.violations == result.audited_violations == audit_trace(result.sim.trace)
    v = result.violations[0]
    assert (v.src, v.dst, v.kind) == ("op-b", "coordinator", "raw-telemetry")
    assert result.exit_code != 0
    types = [e.entry_type for e in result.ledger.entries]
    assert "violation" in types


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_live_counter_matches_audit_on_seeded_runs(seed):
    for path in (REFERENCE, FAULT):
        result = run_scenario(load_scenario(path), seed=seed)
        assert result.violations == result.audited_violations


def test_rounds_csv_has_header_and_rows(reference):
    lines = reference.rounds_csv().splitlines()
    assert lines[0].startswith("round_id,status")
    assert len(lines) == 2 + len(reference.rounds)


def test_invocations_past_duration_never_run():
    text = minimal(rounds=0).replace("name: minimal\n", "name: minimal\nduration_ms: 50000\n") + """\
agents:
  - id: early
    kind: experience-predictor
    input: {latency_ms: 30.0, loss_ratio: 0.0, throughput_mbps: 40.0, demand_mbps: 50.0}
    invoke: {at_ms: 10000}
  - id: late
    kind: experience-predictor
    input: {latency_ms: 30.0, loss_ratio: 0.0, throughput_mbps: 40.0, demand_mbps: 50.0}
    invoke: {at_ms: 60000}
"""
    result = run_scenario(parse_scenario(text, "s.yaml"))
    assert result.sim.now <= 50_000
    assert result.sim.pending() > 0
    times = [e.timestamp for e in result.ledger.entries if e.entry_type == "invocation"]
    assert times and max(times) <= 50_000
