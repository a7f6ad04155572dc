"""Links, message transit and the data-sovereignty monitor."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace

from telcofed import codec
from telcofed.federation.scheduling import CongestionSchedule
from telcofed.simnet.engine import Simulator, TraceRecord

COORDINATOR = "coordinator"
MESSAGE_KINDS = ("raw-telemetry", "insight", "model-update", "control")


@dataclass(frozen=True)
class LinkSpec:
    base_latency_ms: float = 10.0
    bandwidth_mbps: float = 100.0
    congestion: CongestionSchedule = CongestionSchedule()

    def __post_init__(self) -> None:
        if self.base_latency_ms < 0:
            raise ValueError("latency must be >= 0")
        if self.bandwidth_mbps <= 0:
            raise ValueError("bandwidth must be > 0")


@dataclass(frozen=True)
class SimMessage:
    src: str
    dst: str
    kind: str
    size_bytes: int
    payload_digest: bytes = b"\x00" * 32

    def __post_init__(self) -> None:
        if self.kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        if self.size_bytes < 0:
            raise ValueError("size must be >= 0")

    @property
    def crosses_boundary(self) -> bool:
        return self.src != self.dst


@dataclass(frozen=True)
class Blocked:
    message: SimMessage
    reason: str


def is_violation(src: str, dst: str, kind: str) -> bool:
    """Raw telemetry may never leave the operator that produced it."""
    return kind == "raw-telemetry" and src != dst


def transit_ms(size_bytes: int, link: LinkSpec, now: int) -> int:
    """``(base + size*8 / (bandwidth*1000)) * multiplier(now)``, rounded up to whole ms."""
    raw = (link.base_latency_ms + size_bytes * 8 / (link.bandwidth_mbps * 1000)) * link.congestion.multiplier_at(now)
    return math.ceil(raw - 1e-9)


def send(msg: SimMessage, link: LinkSpec, now: int) -> int | Blocked:
    """Delivery time of ``msg`` over ``link``, or :class:`Blocked` for sovereignty breaches."""
    if is_violation(msg.src, msg.dst, msg.kind):
        return Blocked(msg, "raw telemetry may not cross an operator boundary")
    return now + transit_ms(msg.size_bytes, link, now)


@dataclass
class Network:
    """Star topology: every operator reaches the coordinator over its own link.

    Operator-to-operator traffic traverses the sender's link, then the
    receiver's.
    """

    sim: Simulator
    links: Mapping[str, LinkSpec]
    violations: list[TraceRecord] = field(default_factory=list)
    sent: int = 0
    delivered: int = 0

    def route(self, src: str, dst: str) -> list[LinkSpec]:
        if src == dst:
            return []
        hops = []
        for end in (src, dst):
            if end != COORDINATOR:
                if end not in self.links:
                    raise KeyError(f"no link for {end!r}")
                hops.append(self.links[end])
        return hops

    def delivery_time(self, msg: SimMessage, now: int) -> int:
        t = now
        for link in self.route(msg.src, msg.dst):
            t = t + transit_ms(msg.size_bytes, link, t)
        return t

    def send(self, msg: SimMessage, on_deliver: Callable[[SimMessage], None] | None = None) -> int | Blocked:
        now = self.sim.now
        self.sent += 1
        sent = TraceRecord(now, "send", msg.src, msg.dst, msg.kind, msg.size_bytes, msg.payload_digest)
        self.sim.record(sent)
        if is_violation(msg.src, msg.dst, msg.kind):
            # Live counter; audit_trace recomputes the same list from the trace alone.
            self.violations.append(sent)
            self.sim.record(replace(sent, type="block"))
            return Blocked(msg, "raw telemetry may not cross an operator boundary")
        at = self.delivery_time(msg, now)

        def deliver() -> None:
            self.delivered += 1
            if on_deliver is not None:
                on_deliver(msg)

        record = TraceRecord(at, "deliver", msg.src, msg.dst, msg.kind, msg.size_bytes, msg.payload_digest)
        self.sim.schedule_at(at, deliver, "deliver", record)
        return at

    def send_bytes(self, src: str, dst: str, kind: str, data: bytes, on_deliver=None) -> int | Blocked:
        return self.send(SimMessage(src, dst, kind, len(data), codec.digest(data)), on_deliver)


def audit_trace(trace: Sequence[TraceRecord]) -> list[TraceRecord]:
    """Sovereignty violations recomputed from send records alone."""
    return [r for r in trace if r.type == "send" and r.kind == "raw-telemetry" and r.src != r.dst]


def conservation_gaps(trace: Sequence[TraceRecord]) -> dict[str, int]:
    """Unblocked sends minus deliveries, keyed by message identity; empty when conserved."""
    balance: dict[str, int] = {}
    for r in trace:
        key = f"{r.src}>{r.dst}:{r.kind}:{r.digest.hex()}"
        if r.type == "send":
            balance[key] = balance.get(key, 0) + 1
        elif r.type in ("deliver", "block"):
            balance[key] = balance.get(key, 0) - 1
    return {k: v for k, v in balance.items() if v}
