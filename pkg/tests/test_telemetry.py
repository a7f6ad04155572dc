import pytest
from hypothesis import given
from hypothesis import strategies as st

from telcofed.errors import ContractViolationError, UnknownKindError
from telcofed.telemetry import (
    GeneratorSpec,
    KpiWindow,
    TelemetryStore,
    TopologyGraph,
    export_record,
    generate_kpi_series,
    generate_topology,
    import_record,
    ingest,
    inject_anomalies,
    query_window,
    window_records,
)

import oracles


def raw(value=1.0, unit="ms", kind="kpi", key="latency", ts=0):
    return {"operator": "op-a", "domain": "ran", "kind": kind, "key": key, "timestamp": ts, "value": value, "unit": unit}


def test_generation_is_deterministic():
    spec = GeneratorSpec(base=5, noise_sigma=2, length=30, seed=9)
    assert generate_kpi_series(spec) == generate_kpi_series(spec)


def test_closed_form_without_noise():
    w = generate_kpi_series(GeneratorSpec(base=1, trend=2, length=4))
    assert w.values == [1, 3, 5, 7]
    assert w.timestamps == [0, 1000, 2000, 3000]


def test_seeded_noise_matches_independent_generator():
    spec = GeneratorSpec(base=10, trend=0.5, season_amplitude=3, season_period=24, noise_sigma=1, length=100, seed=42)
    want = oracles.kpi_values(10, 0.5, 3, 24, 1, 100, 42)
    got = generate_kpi_series(spec).values
    assert max(abs(a - b) for a, b in zip(got, want)) < 1e-12


def test_generator_spec_validation():
    with pytest.raises(ValueError):
        GeneratorSpec(season_period=0)
    with pytest.raises(ValueError):
        GeneratorSpec(length=0)


def test_single_anomaly_when_rate_small():
    w = generate_kpi_series(GeneratorSpec(length=50))
    _, idx = inject_anomalies(w, 0.001, 8, 1, seed=1)
    assert len(idx) == 1


def test_zero_amplitude_leaves_series():
    w = generate_kpi_series(GeneratorSpec(noise_sigma=1, length=50, seed=3))
    out, idx = inject_anomalies(w, 0.1, 0, 1, seed=1)
    assert out == w and len(idx) == 5


def test_zero_sigma_uses_absolute_shift():
    w = generate_kpi_series(GeneratorSpec(length=20))
    out, idx = inject_anomalies(w, 0.05, 4, 0, seed=2)
    assert out.values[idx[0]] == 4.0


@given(st.integers(0, 2**32), st.integers(1, 500), st.integers(20, 200))
def test_injection_diff_equals_ground_truth(seed, permille, n):
    w = generate_kpi_series(GeneratorSpec(base=3, noise_sigma=1, length=n, seed=seed))
    out, idx = inject_anomalies(w, permille / 1000, 8, 1, seed)
    diff = [i for i, (a, b) in enumerate(zip(w.values, out.values)) if a != b]
    assert diff == sorted(idx)
    assert len(idx) == -(-permille * n // 1000)


def test_injection_rate_bounds():
    w = generate_kpi_series(GeneratorSpec(length=10))
    for rate in (0, 1):
        with pytest.raises(ValueError):
            inject_anomalies(w, rate, 1, 1, 0)


def test_topology_two_nodes():
    g = generate_topology(2, 1, seed=0)
    assert len(g.edges) == 1 and {g.edges[0][0], g.edges[0][1]} == {"n0", "n1"}


def test_topology_deterministic():
    assert generate_topology(12, 2.5, 4) == generate_topology(12, 2.5, 4)


@given(st.integers(2, 40), st.floats(1, 6), st.integers(0, 2**32))
def test_topology_connected_by_bfs(n, degree, seed):
    g = generate_topology(n, degree, seed)
    nodes = [nid for nid, _ in g.nodes]
    assert oracles.reachable(nodes, [(a, b) for a, b, _ in g.edges], nodes[0]) == set(nodes)
    assert all(a != b for a, b, _ in g.edges)


def test_topology_20_nodes_degree_3():
    g = generate_topology(20, 3, seed=11)
    nodes = [nid for nid, _ in g.nodes]
    assert len(g.edges) == 30
    assert oracles.reachable(nodes, [(a, b) for a, b, _ in g.edges], "n7") == set(nodes)


def test_topology_rejects_bad_args():
    with pytest.raises(ValueError):
        generate_topology(1, 2, 0)
    with pytest.raises(ValueError):
        generate_topology(5, 0.5, 0)
    with pytest.raises(ValueError):
        TopologyGraph((("a", "cell"),), (("a", "a", 1.0),))


def test_ingest_conversions():
    assert ingest(raw(0.25, "s")).value == 250.0
    assert ingest(raw(2000, "kbps", key="thr")).value == 2.0
    r = ingest(raw(45, "percent", key="util"))
    assert r.value == 0.45 and r.unit == "ratio"


def test_ingest_unit_hint():
    rec = ingest({k: v for k, v in raw(0.5).items() if k != "unit"}, {"latency": "s"})
    assert rec.value == 500.0 and rec.unit == "ms"


def test_ingest_unknown_kind():
    with pytest.raises(UnknownKindError):
        ingest(raw(kind="video"))


def test_ingest_violations_listed():
    bad = raw()
    del bad["timestamp"]
    bad["value"] = "fast"
    with pytest.raises(ContractViolationError) as exc:
        ingest(bad)
    assert [(v.field, v.reason) for v in exc.value.violations] == [("timestamp", "missing"), ("value", "wrong-type")]


@given(
    st.floats(-1e9, 1e9, allow_nan=False),
    st.sampled_from(["ms", "s", "mbps", "kbps", "percent", "count"]),
    st.integers(0, 2**40),
)
def test_export_import_round_trip(value, unit, ts):
    rec = ingest(raw(value, unit, ts=ts))
    assert import_record(export_record(rec)) == rec


def _store():
    s = TelemetryStore("op-a")
    w = KpiWindow.from_values("latency", [5, 6, 7, 8], step_ms=10, start_ms=100)
    s.extend(reversed(window_records("op-a", "ran", w, "ms")))
    return s


def test_query_window_before_data_is_empty():
    assert len(query_window(_store(), "latency", 0, 100)) == 0


def test_query_window_full_range_ordered():
    assert _store().query_window("latency", 0, 10**6).values == [5, 6, 7, 8]


def test_query_window_half_open():
    assert _store().query_window("latency", 110, 130).timestamps == [110, 120]


def test_query_window_rejects_inverted_range():
    with pytest.raises(ValueError):
        _store().query_window("latency", 5, 4)


def test_store_rejects_foreign_records():
    with pytest.raises(ValueError):
        TelemetryStore("op-b").add(ingest(raw()))


@given(st.lists(st.integers(0, 500), unique=True, max_size=40), st.integers(0, 500), st.integers(0, 500))
def test_query_sorted_and_within_range(stamps, a, b):
    lo, hi = min(a, b), max(a, b)
    s = TelemetryStore("op-a")
    s.extend(ingest(raw(float(t), ts=t)) for t in stamps)
    w = s.query_window("latency", lo, hi)
    assert w.timestamps == sorted(t for t in stamps if lo <= t < hi)
