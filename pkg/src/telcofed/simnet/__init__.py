"""Deterministic discrete-event simulation of sovereign operators and a coordinator."""

from telcofed.simnet.engine import Simulator, TraceRecord, import_trace
from telcofed.simnet.network import (
    COORDINATOR,
    MESSAGE_KINDS,
    Blocked,
    LinkSpec,
    Network,
    SimMessage,
    audit_trace,
    conservation_gaps,
    is_violation,
    send,
    transit_ms,
)

__all__ = [
    "COORDINATOR",
    "MESSAGE_KINDS",
    "Blocked",
    "LinkSpec",
    "Network",
    "SimMessage",
    "Simulator",
    "TraceRecord",
    "audit_trace",
    "conservation_gaps",
    "import_trace",
    "is_violation",
    "send",
    "transit_ms",
]
