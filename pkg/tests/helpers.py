"""Shared fixture builders."""

from __future__ import annotations

from telcofed.agents.reference import build_agent, make_descriptor, register_agent_schemas
from telcofed.crypto import Signer
from telcofed.domain import SchemaRegistry
from telcofed.kernel import DataScope, Kernel
from telcofed.ledger import Ledger
from telcofed.telemetry import KpiWindow, TelemetryStore, register_record_schemas, window_records

PUBLISHER = Signer.from_seed(0, "publisher")
LATENCY_SCOPE = DataScope("self", "kpi", "latency*")


def make_kernel(operator="op-a", series=None, **kwargs) -> Kernel:
    schemas = SchemaRegistry()
    register_record_schemas(schemas)
    register_agent_schemas(schemas)
    store = TelemetryStore(operator)
    for key, values in (series or {}).items():
        store.extend(window_records(operator, "ran", KpiWindow.from_values(key, values), "ms"))
    return Kernel(operator, schemas, store, Ledger(), Signer.from_seed(0, f"kernel:{operator}"), **kwargs)


def add_agent(kernel, agent_id, kind, impl="reference", scopes=(LATENCY_SCOPE,), params=None, version=(1, 0)):
    d = make_descriptor(agent_id, kind, PUBLISHER, scopes, version)
    return kernel.register_agent(d, build_agent(kind, impl, params))


def federation(ops=("op-a", "op-b", "op-c"), seed=0, samples=60, noise=0.1, link=None):
    """Coordinator plus participants holding disjoint shares of one y = 3x dataset."""
    from telcofed.agents.trainer import make_regression_data, partition
    from telcofed.federation.aggregation import GlobalModel
    from telcofed.federation.coordinator import Coordinator, Participant
    from telcofed.simnet import LinkSpec, Network, Simulator

    data = make_regression_data(samples * len(ops), seed, noise_sigma=noise)
    shares = partition(data, len(ops))
    network = Network(Simulator(), {op: link or LinkSpec() for op in ops})
    coord = Coordinator(
        network,
        Ledger(),
        Signer.from_seed(seed, "coordinator"),
        GlobalModel(0, (0.0, 0.0)),
        make_regression_data(200, seed + 1, noise_sigma=noise),
        seed,
    )
    parts = {op: Participant.create(op, share, seed) for op, share in zip(ops, shares)}
    return coord, parts, data


def plan(coord, parts, masking=True, sigma=0.0, clip=10.0, epochs=10, lr=0.2, deadline_ms=60_000, round_id=None):
    from telcofed.federation.scheduling import CongestionSchedule, RoundConfig, plan_round

    cfg = RoundConfig(clip=clip, sigma=sigma, masking=masking, deadline_ms=deadline_ms, local_epochs=epochs, lr=lr)
    return plan_round(coord.model, list(parts), CongestionSchedule(), coord.sim.now, cfg, round_id)


def make_ledger(n=60, signers=2, seed=0) -> Ledger:
    ledger = Ledger()
    keys = [Signer.from_seed(seed, f"ledger-signer-{i}") for i in range(signers)]
    types = ("registration", "invocation", "insight", "round-start", "update-commitment", "round-result")
    for i in range(n):
        ledger.append(f"payload {i}".encode(), types[i % len(types)], keys[i % signers], timestamp=10 * (i // 3))
    return ledger


def first_bad_index(text, keys):
    """Position reported by import, else by chain verification; ``None`` when intact."""
    from telcofed.ledger import LedgerImportError, import_ledger, verify_chain

    try:
        entries = import_ledger(text)
    except LedgerImportError as exc:
        return exc.index
    return verify_chain(entries, keys)


def mutate_byte(data: bytes, pos: int, value: int) -> bytes:
    return data[:pos] + bytes([value]) + data[pos + 1 :]
