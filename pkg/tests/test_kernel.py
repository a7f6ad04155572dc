from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from telcofed.errors import ContractViolationError, UnknownSchemaError
from telcofed.kernel import (
    AgentExecutionError,
    AuthorizationDenied,
    DataScope,
    DuplicateAgentError,
    InsightBus,
    InvalidDescriptorError,
    InvalidSignatureError,
    MalformedTopicError,
    ReadRequest,
    SovereigntyError,
    UnknownAgentError,
    WorkflowCycleError,
    WorkflowEdge,
    WorkflowSpec,
    find_cycle,
    topic_matches,
)
from telcofed.agents.reference import make_descriptor
from telcofed.codec import digest
from telcofed.domain import SchemaRef

import oracles
from helpers import LATENCY_SCOPE, PUBLISHER, add_agent, make_kernel

FLAT = {"latency_ms": [10.0] * 40, "load": [0.5] * 40}


def detector_input(to_ts=40_000):
    return {"key": "latency_ms", "from_ts": 0, "to_ts": to_ts}


# -- registration ----------------------------------------------------------------


def test_register_appends_ledger_entry():
    k = make_kernel()
    add_agent(k, "det", "anomaly-detector")
    assert [e.entry_type for e in k.ledger.entries] == ["registration"]


def test_flipped_signature_byte_rejected():
    k = make_kernel()
    d = make_descriptor("det", "anomaly-detector", PUBLISHER, (LATENCY_SCOPE,))
    for pos in (0, 31, 63):
        sig = bytearray(d.signature)
        sig[pos] ^= 0x01
        with pytest.raises(InvalidSignatureError):
            k.register_agent(replace(d, signature=bytes(sig)), lambda p, c: {})
    assert "det@1.0" not in k.agents


def test_duplicate_registration_rejected():
    k = make_kernel()
    add_agent(k, "det", "anomaly-detector")
    with pytest.raises(DuplicateAgentError):
        add_agent(k, "det", "anomaly-detector")
    add_agent(k, "det", "anomaly-detector", version=(1, 1))


def test_unknown_schema_rejected():
    k = make_kernel()
    d = make_descriptor("det", "anomaly-detector", PUBLISHER, (LATENCY_SCOPE,))
    d = replace(d, input_schema=SchemaRef("missing", 1, 0)).signed_by(PUBLISHER)
    with pytest.raises(UnknownSchemaError):
        k.register_agent(d, lambda p, c: {})


def test_data_reader_needs_scopes():
    with pytest.raises(InvalidDescriptorError):
        add_agent(make_kernel(), "det", "anomaly-detector", scopes=())


# -- mediated reads --------------------------------------------------------------


def test_read_within_scope():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    w = k.mediated_read("det", ReadRequest("latency_ms", 0, 5000))
    assert w.values == [10.0] * 5


def test_read_other_operator_denied_and_audited():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    with pytest.raises(AuthorizationDenied) as exc:
        k.mediated_read("det", ReadRequest("latency_ms", 0, 5000, operator="op-b"))
    assert exc.value.request.operator == "op-b"
    assert k.ledger.entries[-1].entry_type == "authorization-denied"


def test_read_wrong_kind_denied():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    with pytest.raises(AuthorizationDenied):
        k.mediated_read("det", ReadRequest("latency_ms", 0, 5000, kind="alarm"))


def test_remote_scope_still_refused_raw_access():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector", scopes=(DataScope("op-b", "kpi", "*"),))
    with pytest.raises(SovereigntyError):
        k.mediated_read("det", ReadRequest("latency_ms", 0, 5000, operator="op-b"))


def test_scope_grammar():
    with pytest.raises(ValueError):
        DataScope("self", "kpi", "lat*ency")
    with pytest.raises(ValueError):
        DataScope("self", "video", "x")


keys = st.sampled_from(["latency_ms", "latency_p99", "load", "loss", "lat"])
scopes = st.builds(
    DataScope,
    operator=st.sampled_from(["self", "op-a", "op-b"]),
    kind=st.sampled_from(["kpi", "alarm"]),
    key=st.sampled_from(["latency*", "load", "*", "lo*", "latency_ms"]),
)
requests = st.builds(
    ReadRequest,
    key=keys,
    from_ts=st.just(0),
    to_ts=st.just(10_000),
    kind=st.sampled_from(["kpi", "alarm"]),
    operator=st.sampled_from(["self", "op-a", "op-b"]),
)


def _scope_allows(scope, req, home="op-a"):
    op = home if req.operator == "self" else req.operator
    sop = home if scope.operator == "self" else scope.operator
    key_ok = req.key.startswith(scope.key[:-1]) if scope.key.endswith("*") else req.key == scope.key
    return sop == op and scope.kind == req.kind and key_ok


@given(st.lists(scopes, min_size=1, max_size=3), st.lists(requests, min_size=1, max_size=8))
def test_every_out_of_scope_read_denied_and_audited(agent_scopes, reqs):
    k = make_kernel(series={"latency_ms": [1.0] * 10, "load": [2.0] * 10})
    add_agent(k, "det", "anomaly-detector", scopes=agent_scopes)
    for req in reqs:
        allowed = any(_scope_allows(s, req) for s in agent_scopes)
        before = len(k.ledger)
        try:
            k.mediated_read("det", req)
            granted = True
        except AuthorizationDenied:
            granted = False
            assert k.ledger.entries[-1].entry_type == "authorization-denied"
            assert len(k.ledger) == before + 1
        except SovereigntyError:
            granted = False
            assert k.ledger.entries[-1].entry_type == "violation"
        assert not granted or allowed
        if not allowed:
            assert not granted
    # soundness by replaying the access log against declared scopes
    for rec in k.access_log:
        if rec.granted:
            assert rec.scope in agent_scopes and _scope_allows(rec.scope, rec.request)
    assert k.ledger.verify() is None


# -- bus -------------------------------------------------------------------------


def test_sequences_monotone():
    bus = InsightBus()
    assert [bus.publish("sla/report", i) for i in range(2)] == [1, 2]


def test_fan_out_identical():
    bus = InsightBus()
    a, b = bus.subscribe("sla/report"), bus.subscribe("sla/*")
    for i in range(5):
        bus.publish("sla/report", i)
    assert a.messages() == b.messages() == list(range(5))


def test_prefix_literal_and_no_replay():
    bus = InsightBus()
    bus.publish("anomaly/cell7", "early")
    wild, exact = bus.subscribe("anomaly/*"), bus.subscribe("sla/report")
    bus.publish("anomaly/cell7", "late")
    bus.publish("sla/reportX", "other")
    assert wild.messages() == ["late"]
    assert exact.messages() == []


def test_malformed_patterns():
    bus = InsightBus()
    for bad in ("", "a/*/b", "a*", "/a", "a//b"):
        with pytest.raises(MalformedTopicError):
            bus.subscribe(bad)
    with pytest.raises(MalformedTopicError):
        bus.publish("a/*", 1)


def test_topic_match_segment_boundary():
    assert topic_matches("anomaly/*", "anomaly/x/y")
    assert not topic_matches("anomaly/*", "anomalyx/y")


TOPICS = ["anomaly/a", "anomaly/b", "sla/r", "capacity/x/y"]
PATTERNS = ["*", "anomaly/*", "sla/r", "capacity/*", "capacity/x/*", "anomaly/a"]


@given(
    st.lists(st.sampled_from(PATTERNS), min_size=1, max_size=4),
    st.lists(st.tuples(st.sampled_from(TOPICS), st.integers()), max_size=40),
)
def test_per_topic_delivery_order_equals_publish_order(patterns, publishes):
    bus = InsightBus()
    subs = [bus.subscribe(p) for p in patterns]
    for topic, payload in publishes:
        bus.publish(topic, (topic, payload))
    for sub in subs:
        for topic in TOPICS:
            want = [(t, m) for t, m in publishes if t == topic] if topic_matches(sub.pattern, topic) else []
            got = [e.message for e in sub.received if e.topic == topic]
            assert got == want
            assert [e.seq for e in sub.received if e.topic == topic] == list(range(1, len(want) + 1))


def test_reentrant_publish_keeps_order():
    bus = InsightBus()
    log = []
    bus.subscribe("a/*", lambda env: bus.publish("b/x", env.message) if env.seq == 1 else None)
    rec = bus.subscribe("*", lambda env: log.append((env.topic, env.message)))
    bus.publish("a/x", 1)
    bus.publish("a/x", 2)
    assert log == [("a/x", 1), ("b/x", 1), ("a/x", 2)]
    assert len(rec.received) == 3


# -- invocation ------------------------------------------------------------------


def test_invoke_returns_valid_signed_insight():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    ins = k.invoke("det", detector_input())
    assert k.schemas.validate_payload(k.agents["det@1.0"].descriptor.output_schema, ins.payload) == []
    assert ins.verify(k.signer.public_key)
    assert ins.topic == "anomaly/det"
    assert ins.payload["count"] == 0


def test_invoke_deterministic():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    a, b = k.invoke("det", detector_input()), k.invoke("det", detector_input())
    assert a.payload_bytes == b.payload_bytes and a.input_digest == b.input_digest


def test_input_violation_rejected_before_run():
    k = make_kernel(series=FLAT)
    calls = []
    d = make_descriptor("det", "anomaly-detector", PUBLISHER, (LATENCY_SCOPE,))
    k.register_agent(d, lambda p, c: calls.append(p))
    with pytest.raises(ContractViolationError):
        k.invoke("det", {"key": "latency_ms", "from_ts": 0})
    assert calls == []


def test_audit_trail_reverifies():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    ins = k.invoke("det", detector_input())
    inv = [a for a in k.audit if a.entry_type == "invocation"][-1]
    assert digest(inv.payload) == ins.input_digest
    assert k.ledger.entries[inv.index].payload_digest == digest(inv.payload)
    logged = [a for a in k.audit if a.entry_type == "insight"][-1]
    assert logged.payload == ins.encode()
    assert k.ledger.verify() is None


def test_agent_failure_is_typed_and_audited():
    k = make_kernel(series=FLAT)
    d = make_descriptor("boom", "anomaly-detector", PUBLISHER, (LATENCY_SCOPE,))

    def boom(p, c):
        raise ZeroDivisionError("nope")

    k.register_agent(d, boom)
    with pytest.raises(AgentExecutionError) as exc:
        k.invoke("boom", detector_input())
    assert isinstance(exc.value.__cause__, ZeroDivisionError)
    assert k.ledger.entries[-1].entry_type == "violation"


def test_unknown_agent():
    with pytest.raises(UnknownAgentError):
        make_kernel().invoke("ghost", {})


def test_publish_rejects_schema_violation():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    ins = k.invoke("det", detector_input())
    bad = replace(ins, payload={"count": 1})
    with pytest.raises(ContractViolationError):
        k.publish(ins.topic, bad)


# -- health ----------------------------------------------------------------------


def _flaky(kernel, script):
    d = make_descriptor("flaky", "experience-predictor", PUBLISHER)
    results = iter(script)

    def impl(p, c):
        if not next(results):
            raise RuntimeError("induced")
        return {"score": 1.0, "latency_score": 1.0, "loss_score": 1.0, "throughput_score": 1.0}

    kernel.register_agent(d, impl)


QOE = {"latency_ms": 50.0, "loss_ratio": 0.0, "throughput_mbps": 1.0, "demand_mbps": 1.0}


def _run(kernel):
    try:
        kernel.invoke("flaky", QOE)
    except AgentExecutionError:
        pass
    return kernel.health_check("flaky").status


def test_fresh_agent_healthy():
    k = make_kernel()
    _flaky(k, [])
    h = k.health_check("flaky")
    assert (h.status, h.error_count, h.last_invocation) == ("healthy", 0, None)


def test_three_faults_fail():
    k = make_kernel()
    _flaky(k, [False] * 3)
    assert [_run(k) for _ in range(3)] == ["degraded", "degraded", "failed"]


def test_success_resets():
    k = make_kernel()
    _flaky(k, [False, False, True])
    assert [_run(k) for _ in range(3)] == ["degraded", "degraded", "healthy"]
    assert k.health_check("flaky").error_count == 2


# -- workflows -------------------------------------------------------------------


def test_detector_chain_triggers_one_sla_invocation():
    values = [10.0] * 39 + [90.0]
    k = make_kernel(series={"latency_ms": values})
    add_agent(k, "det", "anomaly-detector")
    add_agent(k, "sla", "sla-monitor")
    k.compose_workflow(WorkflowSpec(("det", "sla"), (WorkflowEdge("det", "sla", constants={"threshold": 30.0}),)))
    sla_out = k.subscribe("sla/*")
    k.invoke("det", detector_input(), publish=True)
    assert k.triggered == [(1, "sla@1.0")]
    assert len(sla_out.received) == 1
    assert sla_out.received[0].message.payload["compliant"] is True


def test_two_cycle_rejected_with_nodes():
    k = make_kernel()
    add_agent(k, "A", "anomaly-detector")
    add_agent(k, "B", "sla-monitor")
    with pytest.raises(WorkflowCycleError) as exc:
        k.compose_workflow(WorkflowSpec.chain([("A", "B"), ("B", "A")]))
    assert exc.value.cycle == ["A", "B"]


def test_empty_workflow_triggers_nothing():
    k = make_kernel(series=FLAT)
    add_agent(k, "det", "anomaly-detector")
    k.compose_workflow(WorkflowSpec(("det",)))
    k.invoke("det", detector_input(), publish=True)
    assert k.triggered == []


NODES = [f"a{i}" for i in range(6)]


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 6))
    nodes = NODES[:n]
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return nodes, edges


@st.composite
def cyclic_graphs(draw):
    nodes, edges = draw(graphs())
    length = draw(st.integers(2, 6))
    ring = draw(st.permutations(NODES))[:length]
    nodes = sorted(set(nodes) | set(ring))
    extra = [(ring[i], ring[(i + 1) % len(ring)]) for i in range(len(ring))]
    return nodes, sorted(set(edges) | set(extra))


@st.composite
def dags(draw):
    order = draw(st.permutations(NODES))
    n = draw(st.integers(1, 6))
    nodes = order[:n]
    pairs = [(nodes[i], nodes[j]) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    return sorted(nodes), edges


def _dag_kernel():
    k = make_kernel()
    for name in NODES:
        add_agent(k, name, "experience-predictor", scopes=())
    return k


def _check_cycle(cycle, edges):
    es = set(edges)
    assert len(set(cycle)) == len(cycle) >= 2 or (len(cycle) == 1 and (cycle[0], cycle[0]) in es)
    assert all((cycle[i], cycle[(i + 1) % len(cycle)]) in es for i in range(len(cycle)))


@given(graphs())
def test_find_cycle_agrees_with_topological_sort(g):
    nodes, edges = g
    cycle = find_cycle(nodes, edges)
    assert (cycle is not None) == oracles.has_cycle(nodes, edges)
    if cycle is not None:
        _check_cycle(cycle, edges)


@given(cyclic_graphs())
def test_compose_rejects_all_cyclic_specs(g):
    nodes, edges = g
    assert oracles.has_cycle(nodes, edges)
    with pytest.raises(WorkflowCycleError) as exc:
        _dag_kernel().compose_workflow(WorkflowSpec(tuple(nodes), tuple(WorkflowEdge(a, b) for a, b in edges)))
    _check_cycle(exc.value.cycle, edges)


@given(dags())
def test_compose_accepts_all_dags(g):
    nodes, edges = g
    assert not oracles.has_cycle(nodes, edges)
    k = _dag_kernel()
    assert k.compose_workflow(WorkflowSpec(tuple(nodes), tuple(WorkflowEdge(a, b) for a, b in edges))).startswith("wf")


@given(dags())
def test_dag_triggers_bounded_by_edge_count(g):
    nodes, edges = g
    k = _dag_kernel()
    k.compose_workflow(WorkflowSpec(tuple(nodes), tuple(WorkflowEdge(a, b) for a, b in edges)))
    k.invoke(nodes[0], QOE, publish=True)
    assert len(k.triggered) <= len(edges)
