"""The agent kernel: registration, mediated reads, invocation, workflows, health."""

from __future__ import annotations

import itertools
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from typing import Any, Literal, Protocol

from telcofed import codec
from telcofed.crypto import Signer
from telcofed.domain import SchemaRegistry, freeze_payload
from telcofed.errors import ContractViolationError, TelcoFedError, UnknownSchemaError
from telcofed.kernel.bus import Envelope, InsightBus, Subscription
from telcofed.kernel.contracts import (
    AgentDescriptor,
    DataScope,
    Insight,
    ReadRequest,
    WorkflowSpec,
    find_cycle,
)
from telcofed.ledger import Ledger
from telcofed.telemetry import KpiWindow, TelemetryStore

DEFAULT_FAILURE_THRESHOLD = 3

HealthStatus = Literal["healthy", "degraded", "failed"]


class KernelError(TelcoFedError):
    pass


class InvalidSignatureError(KernelError, ValueError):
    pass


class DuplicateAgentError(KernelError, ValueError):
    pass


class InvalidDescriptorError(KernelError, ValueError):
    pass


class UnknownAgentError(KernelError, KeyError):
    def __str__(self) -> str:
        return f"unknown agent: {self.args[0]}"


class AuthorizationDenied(KernelError, PermissionError):
    def __init__(self, agent: str, request: ReadRequest) -> None:
        self.agent = agent
        self.request = request
        super().__init__(
            f"{agent} may not read {request.operator}:{request.kind}:{request.key}"
        )


class SovereigntyError(KernelError, PermissionError):
    """Raw data of another operator is not reachable from this kernel."""


class AgentExecutionError(KernelError, RuntimeError):
    def __init__(self, agent: str, message: str) -> None:
        self.agent = agent
        super().__init__(f"{agent}: {message}")


class OutputContractError(AgentExecutionError):
    def __init__(self, agent: str, violations: list) -> None:
        self.violations = violations
        detail = ", ".join(f"{v.field}: {v.reason}" for v in violations)
        super().__init__(agent, f"output violates contract ({detail})")


class WorkflowCycleError(KernelError, ValueError):
    def __init__(self, cycle: list[str]) -> None:
        self.cycle = cycle
        super().__init__(f"workflow contains a cycle: {' -> '.join(cycle)}")


class AgentImpl(Protocol):
    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> Mapping[str, Any]: ...


Egress = Callable[[str, str, str, bytes], object]


@dataclass
class AgentContext:
    """What an agent sees of the kernel during one invocation."""

    kernel: Kernel
    agent: str
    points_read: int = 0

    @property
    def operator(self) -> str:
        return self.kernel.operator

    @property
    def now(self) -> int:
        return self.kernel.clock()

    def read(self, request: ReadRequest) -> KpiWindow:
        window = self.kernel.mediated_read(self.agent, request)
        self.points_read += len(window)
        return window

    def send(self, dst: str, kind: str, data: bytes) -> object:
        """Hand a message to the network attached to this kernel."""
        if self.kernel.egress is None:
            raise KernelError("kernel has no network attached")
        return self.kernel.egress(self.kernel.operator, dst, kind, data)


@dataclass
class AgentRecord:
    descriptor: AgentDescriptor
    impl: AgentImpl
    error_count: int = 0
    consecutive_errors: int = 0
    invocations: int = 0
    last_invocation: int | None = None
    last_cost_ms: float = 0.0


@dataclass(frozen=True)
class Health:
    status: HealthStatus
    last_invocation: int | None
    error_count: int
    consecutive_errors: int


@dataclass(frozen=True)
class AuditRecord:
    """Ledger entry plus the bytes whose digest it commits to."""

    index: int
    entry_type: str
    subject: str
    payload: bytes


@dataclass(frozen=True)
class AccessRecord:
    agent: str
    request: ReadRequest
    granted: bool
    scope: DataScope | None
    points: int


@dataclass(frozen=True)
class CostModel:
    """Virtual execution time of one invocation, in milliseconds."""

    base_ms: float = 1.0
    per_point_ms: float = 0.01
    per_input_number_ms: float = 0.001

    def cost(self, payload: Mapping[str, Any], points_read: int, extra_ms: float = 0.0) -> float:
        numbers = sum(len(v) if isinstance(v, (list, tuple)) else 1 for v in payload.values())
        return self.base_ms + self.per_point_ms * points_read + self.per_input_number_ms * numbers + extra_ms


class Kernel:
    """Hosts agents for one operator.

    All state changes run on the caller's thread; under the simulator this is
    the single event loop, so invocations never overlap.
    """

    def __init__(
        self,
        operator: str,
        schemas: SchemaRegistry,
        store: TelemetryStore,
        ledger: Ledger,
        signer: Signer,
        clock: Callable[[], int] | None = None,
        failure_threshold: int = DEFAULT_FAILURE_THRESHOLD,
        egress: Egress | None = None,
        cost_model: CostModel = CostModel(),
    ) -> None:
        self.operator = operator
        self.schemas = schemas
        self.store = store
        self.ledger = ledger
        self.signer = signer
        self.clock = clock or (lambda: 0)
        self.failure_threshold = failure_threshold
        self.egress = egress
        self.cost_model = cost_model
        self.bus = InsightBus()
        self.agents: dict[str, AgentRecord] = {}
        self.audit: list[AuditRecord] = []
        self.access_log: list[AccessRecord] = []
        self.workflows: dict[str, WorkflowSpec] = {}
        self.workflow_errors: list[AgentExecutionError | ContractViolationError] = []
        self.triggered: list[tuple[int, str]] = []
        self._fired: set[tuple[str, int, int]] = set()
        self._wf_ids = itertools.count(1)
        ledger.add_key(signer)

    # -- audit -------------------------------------------------------------

    def _audit(self, entry_type: str, subject: str, payload: bytes) -> None:
        entry = self.ledger.append(payload, entry_type, self.signer, self.clock())
        self.audit.append(AuditRecord(entry.index, entry_type, subject, payload))

    # -- registration ------------------------------------------------------

    def register_agent(self, descriptor: AgentDescriptor, impl: AgentImpl) -> str:
        key = descriptor.key
        try:
            if not descriptor.verify():
                raise InvalidSignatureError(f"descriptor signature for {key} does not verify")
            for ref in (descriptor.input_schema, descriptor.output_schema):
                if ref not in self.schemas:
                    raise UnknownSchemaError(str(ref))
            if key in self.agents:
                raise DuplicateAgentError(f"{key} is already registered")
            if descriptor.kind.reads_data and not descriptor.scopes:
                raise InvalidDescriptorError(f"{key}: data-reading agents must declare scopes")
        except (KernelError, UnknownSchemaError) as exc:
            self._audit("violation", key, codec.enc_str(f"registration rejected: {exc}"))
            raise
        self.agents[key] = AgentRecord(descriptor, impl)
        self._audit("registration", key, descriptor.encode())
        return key

    def resolve(self, agent: str) -> AgentRecord:
        rec = self.agents.get(agent)
        if rec is not None:
            return rec
        versions = [r for r in self.agents.values() if r.descriptor.agent_id == agent]
        if not versions:
            raise UnknownAgentError(agent)
        return max(versions, key=lambda r: r.descriptor.version)

    # -- mediated data access ---------------------------------------------

    def mediated_read(self, agent: str, request: ReadRequest) -> KpiWindow:
        """Window for ``request`` if one of the agent's scopes allows it.

        Denials raise :class:`AuthorizationDenied` and are audited.
        """
        rec = self.resolve(agent)
        key = rec.descriptor.key
        target = self.operator if request.operator == "self" else request.operator
        scope = next(
            (s for s in rec.descriptor.scopes if s.allows(target, request.kind, request.key, self.operator)),
            None,
        )
        if scope is None:
            self.access_log.append(AccessRecord(key, request, False, None, 0))
            self._audit("authorization-denied", key, codec.enc_str(key) + request.encode())
            raise AuthorizationDenied(key, request)
        if target != self.operator:
            self.access_log.append(AccessRecord(key, request, False, scope, 0))
            self._audit("violation", key, codec.enc_str("remote raw read refused") + request.encode())
            raise SovereigntyError(f"{key}: raw data of {target} never leaves its operator")
        window = self.store.query_window(request.key, request.from_ts, request.to_ts, kind=request.kind)
        self.access_log.append(AccessRecord(key, request, True, scope, len(window)))
        return window

    # -- bus ---------------------------------------------------------------

    def subscribe(self, pattern: str, handler=None) -> Subscription:
        return self.bus.subscribe(pattern, handler)

    def publish(self, topic: str, insight: Insight, cascade: int | None = None) -> int:
        rec = self.resolve(insight.agent_key)
        violations = self.schemas.validate_payload(rec.descriptor.output_schema, insight.payload)
        if violations:
            self._audit("violation", rec.descriptor.key, codec.enc_str(f"publish rejected on {topic}"))
            raise ContractViolationError(violations, f"publish by {rec.descriptor.key}")
        return self.bus.publish(topic, insight, cascade)

    # -- invocation --------------------------------------------------------

    def invoke(self, agent: str, payload: Mapping[str, Any], *, publish: bool = False, cascade: int | None = None) -> Insight:
        rec = self.resolve(agent)
        d = rec.descriptor
        violations = self.schemas.validate_payload(d.input_schema, payload)
        if violations:
            self._audit("violation", d.key, codec.enc_str("input rejected"))
            raise ContractViolationError(violations, f"input to {d.key}")
        input_bytes = self.schemas.encode(d.input_schema, payload)
        self._audit("invocation", d.key, input_bytes)
        now = self.clock()
        rec.invocations += 1
        rec.last_invocation = now
        ctx = AgentContext(self, d.key)
        try:
            output = rec.impl(freeze_payload(payload), ctx)
            if not isinstance(output, Mapping):
                raise AgentExecutionError(d.key, f"returned {type(output).__name__}, not a payload")
            out_violations = self.schemas.validate_payload(d.output_schema, output)
            if out_violations:
                raise OutputContractError(d.key, out_violations)
        except Exception as exc:  # noqa: BLE001 - agent faults are contained and audited
            self._record_failure(rec)
            err = exc if isinstance(exc, AgentExecutionError) else AgentExecutionError(d.key, f"{type(exc).__name__}: {exc}")
            self._audit("violation", d.key, codec.enc_str(str(err)))
            raise err from exc
        rec.consecutive_errors = 0
        rec.last_cost_ms = self.cost_model.cost(payload, ctx.points_read, getattr(rec.impl, "virtual_cost_ms", 0.0))
        insight = Insight(
            agent_id=d.agent_id,
            agent_version=d.version,
            timestamp=now,
            topic=d.topic,
            payload=freeze_payload(output),
            payload_bytes=self.schemas.encode(d.output_schema, output),
            input_digest=codec.digest(input_bytes),
        ).signed_by(self.signer)
        self._audit("insight", d.key, insight.encode())
        if publish:
            self.publish(insight.topic, insight, cascade)
        return insight

    def _record_failure(self, rec: AgentRecord) -> None:
        rec.error_count += 1
        rec.consecutive_errors += 1

    def health_check(self, agent: str) -> Health:
        rec = self.resolve(agent)
        if rec.consecutive_errors >= self.failure_threshold:
            status: HealthStatus = "failed"
        elif rec.consecutive_errors > 0:
            status = "degraded"
        else:
            status = "healthy"
        return Health(status, rec.last_invocation, rec.error_count, rec.consecutive_errors)

    # -- workflows ---------------------------------------------------------

    def compose_workflow(self, spec: WorkflowSpec) -> str:
        """Wire agents into a DAG; each edge fires at most once per external stimulus."""
        for name in {*spec.nodes, *(e.source for e in spec.edges), *(e.target for e in spec.edges)}:
            self.resolve(name)
        cycle = find_cycle(list(spec.nodes), [(e.source, e.target) for e in spec.edges])
        if cycle is not None:
            raise WorkflowCycleError(cycle)
        wf_id = f"wf{next(self._wf_ids)}"
        self.workflows[wf_id] = spec
        for idx, edge in enumerate(spec.edges):
            source = self.resolve(edge.source).descriptor
            pattern = edge.topic or source.topic
            self.bus.subscribe(pattern, self._edge_handler(wf_id, idx, source.agent_id))
        return wf_id

    def _edge_handler(self, wf_id: str, idx: int, source_id: str) -> Callable[[Envelope], None]:
        def handle(env: Envelope) -> None:
            insight = env.message
            if not isinstance(insight, Insight) or insight.agent_id != source_id:
                return
            mark = (wf_id, idx, env.cascade)
            if mark in self._fired:
                return
            self._fired.add(mark)
            edge = self.workflows[wf_id].edges[idx]
            target = self.resolve(edge.target)
            payload = self._map_payload(edge, insight.payload, target.descriptor)
            self.triggered.append((env.cascade, target.descriptor.key))
            try:
                self.invoke(target.descriptor.key, payload, publish=True, cascade=env.cascade)
            except (AgentExecutionError, ContractViolationError) as exc:
                self.workflow_errors.append(exc)

        return handle

    def _map_payload(self, edge, source_payload: Mapping[str, Any], target: AgentDescriptor) -> dict[str, Any]:
        fields = [f.name for f in self.schemas.get(target.input_schema).fields]
        if edge.field_map:
            out = {dst: source_payload[src] for dst, src in edge.field_map.items() if src in source_payload}
        else:
            out = {k: source_payload[k] for k in fields if k in source_payload}
        out.update(edge.constants)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

