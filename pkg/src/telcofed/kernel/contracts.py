"""Agent descriptors, data scopes, insights and workflow specs."""

from __future__ import annotations

import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Any

from telcofed import codec
from telcofed.crypto import Signer, key_id, verify_signature
from telcofed.domain import SchemaRef
from telcofed.telemetry import KINDS

_KEY_RE = re.compile(r"^[A-Za-z0-9_.\-]*\*?$")


class AgentKind(str, Enum):
    ANOMALY_DETECTOR = "anomaly-detector"
    EXPERIENCE_PREDICTOR = "experience-predictor"
    SLA_MONITOR = "sla-monitor"
    OPTIMIZATION_ADVISOR = "optimization-advisor"
    CAPACITY_FORECASTER = "capacity-forecaster"

    @property
    def topic_prefix(self) -> str:
        return _TOPIC_PREFIX[self]

    @property
    def reads_data(self) -> bool:
        return self in _DATA_READERS


_TOPIC_PREFIX = {
    AgentKind.ANOMALY_DETECTOR: "anomaly",
    AgentKind.EXPERIENCE_PREDICTOR: "experience",
    AgentKind.SLA_MONITOR: "sla",
    AgentKind.OPTIMIZATION_ADVISOR: "optimization",
    AgentKind.CAPACITY_FORECASTER: "capacity",
}

_DATA_READERS = frozenset(
    {AgentKind.ANOMALY_DETECTOR, AgentKind.SLA_MONITOR, AgentKind.CAPACITY_FORECASTER}
)


@dataclass(frozen=True)
class DataScope:
    """Read permission: ``operator`` is an operator id or ``"self"``; ``key`` may end in ``*``."""

    operator: str
    kind: str
    key: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"scope kind {self.kind!r} is not a telemetry kind")
        if not self.operator or not _KEY_RE.match(self.key) or not self.key:
            raise ValueError(f"malformed scope {self}")

    def allows(self, operator: str, kind: str, key: str, home: str) -> bool:
        scope_op = home if self.operator == "self" else self.operator
        if scope_op != operator or self.kind != kind:
            return False
        if self.key.endswith("*"):
            return key.startswith(self.key[:-1])
        return key == self.key

    def encode(self) -> bytes:
        return codec.enc_str(self.operator) + codec.enc_str(self.kind) + codec.enc_str(self.key)

    def __str__(self) -> str:
        return f"{self.operator}:{self.kind}:{self.key}"


@dataclass(frozen=True)
class ReadRequest:
    key: str
    from_ts: int
    to_ts: int
    kind: str = "kpi"
    operator: str = "self"

    def encode(self) -> bytes:
        return (
            codec.enc_str(self.operator)
            + codec.enc_str(self.kind)
            + codec.enc_str(self.key)
            + codec.enc_int(self.from_ts)
            + codec.enc_int(self.to_ts)
        )


@dataclass(frozen=True)
class AgentDescriptor:
    agent_id: str
    kind: AgentKind
    version: tuple[int, int]
    input_schema: SchemaRef
    output_schema: SchemaRef
    scopes: tuple[DataScope, ...] = ()
    publisher_key: bytes = b""
    signature: bytes = b""

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AgentKind(self.kind))
        object.__setattr__(self, "scopes", tuple(self.scopes))
        object.__setattr__(self, "version", tuple(self.version))

    @property
    def key(self) -> str:
        return f"{self.agent_id}@{self.version[0]}.{self.version[1]}"

    @property
    def topic(self) -> str:
        return f"{self.kind.topic_prefix}/{self.agent_id}"

    def signing_bytes(self) -> bytes:
        return (
            codec.enc_str(self.agent_id)
            + codec.enc_str(self.kind.value)
            + codec.enc_int(self.version[0])
            + codec.enc_int(self.version[1])
            + self.input_schema.encode()
            + self.output_schema.encode()
            + codec.enc_seq(s.encode() for s in self.scopes)
            + codec.enc_bytes(self.publisher_key)
        )

    def encode(self) -> bytes:
        return self.signing_bytes() + codec.enc_bytes(self.signature)

    def signed_by(self, publisher: Signer) -> AgentDescriptor:
        unsigned = replace(self, publisher_key=publisher.public_key, signature=b"")
        return replace(unsigned, signature=publisher.sign(unsigned.signing_bytes()))

    def verify(self) -> bool:
        return bool(self.publisher_key) and verify_signature(
            self.publisher_key, self.signing_bytes(), self.signature
        )

    @property
    def publisher_id(self) -> str:
        return key_id(self.publisher_key)


@dataclass(frozen=True)
class Insight:
    agent_id: str
    agent_version: tuple[int, int]
    timestamp: int
    topic: str
    payload: Mapping[str, Any]
    payload_bytes: bytes
    input_digest: bytes
    signer: str = ""
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return (
            codec.enc_str(self.agent_id)
            + codec.enc_int(self.agent_version[0])
            + codec.enc_int(self.agent_version[1])
            + codec.enc_int(self.timestamp)
            + codec.enc_str(self.topic)
            + codec.enc_bytes(self.payload_bytes)
            + codec.enc_bytes(self.input_digest)
        )

    def encode(self) -> bytes:
        return self.signing_bytes() + codec.enc_str(self.signer) + codec.enc_bytes(self.signature)

    def signed_by(self, signer: Signer) -> Insight:
        return replace(self, signer=signer.key_id, signature=signer.sign(self.signing_bytes()))

    def verify(self, public_key: bytes) -> bool:
        return verify_signature(public_key, self.signing_bytes(), self.signature)

    @property
    def agent_key(self) -> str:
        return f"{self.agent_id}@{self.agent_version[0]}.{self.agent_version[1]}"


@dataclass(frozen=True)
class WorkflowEdge:
    """Insights published by ``source`` trigger ``target``.

    The target's input is built from the insight payload: ``field_map`` maps
    target field -> source field (identity on shared names when empty), and
    ``constants`` supplies fixed target fields.
    """

    source: str
    target: str
    topic: str | None = None
    field_map: Mapping[str, str] = field(default_factory=dict)
    constants: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "field_map", MappingProxyType(dict(self.field_map)))
        object.__setattr__(self, "constants", MappingProxyType(dict(self.constants)))


@dataclass(frozen=True)
class WorkflowSpec:
    nodes: tuple[str, ...]
    edges: tuple[WorkflowEdge, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))

    @classmethod
    def chain(cls, pairs: Sequence[tuple[str, str]]) -> WorkflowSpec:
        nodes = sorted({a for pair in pairs for a in pair})
        return cls(tuple(nodes), tuple(WorkflowEdge(a, b) for a, b in pairs))


def find_cycle(nodes: Sequence[str], edges: Sequence[tuple[str, str]]) -> list[str] | None:
    """A cycle in the directed graph as a node list, rotated to start at its smallest id."""
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, [])
    for succ in adj.values():
        succ.sort()
    state: dict[str, int] = {}
    for root in sorted(adj):
        if root in state:
            continue
        path: list[str] = []
        stack = [(root, iter(adj[root]))]
        state[root] = 1
        path.append(root)
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                state[node] = 2
                continue
            if state.get(nxt) == 1:
                cycle = path[path.index(nxt):]
                k = cycle.index(min(cycle))
                return cycle[k:] + cycle[:k]
            if nxt not in state:
                state[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(adj[nxt])))
    return None
