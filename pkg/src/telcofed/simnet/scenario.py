"""Scenario files: loading, validation and end-to-end execution.

A scenario is a YAML document describing operators, the agents they host,
workflows between agents and the federation schedule. Validation errors
carry the field path and the source line of the offending node.
"""

from __future__ import annotations

import json
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

import telcofed
from telcofed import codec
from telcofed.agents.reference import build_agent, make_descriptor, register_agent_schemas
from telcofed.agents.trainer import make_regression_data
from telcofed.crypto import Signer
from telcofed.domain import SchemaRegistry
from telcofed.errors import TelcoFedError
from telcofed.federation.aggregation import GlobalModel
from telcofed.federation.coordinator import Coordinator, Participant, RoundRecord
from telcofed.federation.scheduling import CongestionSchedule, CongestionWindow, RoundConfig, plan_round
from telcofed.kernel.contracts import AgentKind, DataScope, WorkflowEdge, WorkflowSpec
from telcofed.kernel.core import Kernel, KernelError
from telcofed.ledger import Ledger
from telcofed.rng import derive_seed
from telcofed.simnet.engine import Simulator, TraceRecord
from telcofed.simnet.network import COORDINATOR, Blocked, LinkSpec, Network, audit_trace
from telcofed.telemetry import DOMAINS, GeneratorSpec, KpiWindow, TelemetryStore, generate_kpi_series, inject_anomalies, register_record_schemas, window_records

_ID_RE = re.compile(r"^[a-z0-9][a-z0-9._-]*$")

Path_ = tuple[str | int, ...]


class ScenarioError(TelcoFedError, ValueError):
    """Invalid scenario; ``path`` is the dotted field path, ``line`` 1-based or ``None``."""

    def __init__(self, message: str, path: str = "", line: int | None = None, source: str = "<scenario>") -> None:
        self.message = message
        self.path = path
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {path or '<root>'}: {message}")


# -- config types --------------------------------------------------------------


@dataclass(frozen=True)
class TelemetryConfig:
    key: str
    domain: str = "ran"
    unit: str = "ms"
    step_ms: int = 1000
    generator: GeneratorSpec = GeneratorSpec()
    anomaly_rate: float | None = None
    anomaly_sigmas: float = 8.0
    anomaly_min_index: int = 20


@dataclass(frozen=True)
class OperatorConfig:
    id: str
    region: str
    link: LinkSpec
    telemetry: tuple[TelemetryConfig, ...]
    training_samples: int = 100
    participates: bool = True


@dataclass(frozen=True)
class InvokeConfig:
    at_ms: int
    every_ms: int = 0
    count: int = 1
    lookback_ms: int | None = None


@dataclass(frozen=True)
class AgentConfig:
    id: str
    kind: AgentKind
    implementation: str = "reference"
    params: Mapping[str, Any] = field(default_factory=dict)
    scopes: tuple[DataScope, ...] = ()
    operators: tuple[str, ...] | None = None  # None: every operator
    input: Mapping[str, Any] = field(default_factory=dict)
    invoke: InvokeConfig | None = None


@dataclass(frozen=True)
class FederationConfig:
    rounds: int = 0
    clip: float = 1.0
    sigma: float = 0.0
    masking: bool = True
    deadline_ms: int = 60_000
    start_ms: int = 0
    interval_ms: int = 0
    lookahead_ms: int = 3_600_000
    congestion: CongestionSchedule = CongestionSchedule()
    local_epochs: int = 10
    lr: float = 0.2
    eval_samples: int = 200
    task_w: float = 3.0
    task_b: float = 0.0
    task_noise: float = 0.1
    required: bool = True
    dropouts: Mapping[str, tuple[int, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class ReportingConfig:
    include_weights: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    duration_ms: int
    operators: tuple[OperatorConfig, ...]
    agents: tuple[AgentConfig, ...] = ()
    workflows: tuple[tuple[WorkflowEdge, ...], ...] = ()
    federation: FederationConfig = FederationConfig()
    reporting: ReportingConfig = ReportingConfig()

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, seed=seed)

    def participants(self) -> list[str]:
        return [o.id for o in self.operators if o.participates]


# -- YAML reading with locations -----------------------------------------------


def _node_lines(node: yaml.Node | None, path: Path_ = (), out: dict[Path_, int] | None = None) -> dict[Path_, int]:
    """Map every field path in the document to the 1-based line where it starts."""
    out = {} if out is None else out
    if node is None:
        return out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _node_lines(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _node_lines(v, path + (i,), out)
    return out


def _dotted(path: Path_) -> str:
    s = ""
    for p in path:
        s += f"[{p}]" if isinstance(p, int) else (f".{p}" if s else str(p))
    return s


class _Reader:
    def __init__(self, lines: Mapping[Path_, int], source: str) -> None:
        self.lines = lines
        self.source = source

    def error(self, path: Path_, message: str) -> ScenarioError:
        probe = path
        while probe and probe not in self.lines:
            probe = probe[:-1]
        return ScenarioError(message, _dotted(path), self.lines.get(probe), self.source)

    def mapping(self, value: Any, path: Path_, allowed: Sequence[str]) -> Mapping[str, Any]:
        if value is None:
            value = {}
        if not isinstance(value, Mapping):
            raise self.error(path, f"expected a mapping, got {type(value).__name__}")
        for k in value:
            if k not in allowed:
                raise self.error(path + (str(k),), f"unknown field (allowed: {', '.join(allowed)})")
        return value

    def free_mapping(self, value: Any, path: Path_) -> dict[str, Any]:
        return dict(self.mapping(value, path, tuple(value or ()) if isinstance(value, Mapping) else ()))

    def seq(self, value: Any, path: Path_) -> list:
        if value is None:
            return []
        if not isinstance(value, list):
            raise self.error(path, f"expected a list, got {type(value).__name__}")
        return value

    def get(self, m: Mapping[str, Any], key: str, path: Path_, typ, default: Any = ..., check=None):
        if key not in m or m[key] is None:
            if default is ...:
                raise self.error(path + (key,), "required field is missing")
            return default
        v = m[key]
        ok = isinstance(v, typ) and not (isinstance(v, bool) and typ in (int, float, (int, float)))
        if not ok:
            name = typ.__name__ if isinstance(typ, type) else "number"
            raise self.error(path + (key,), f"expected {name}, got {type(v).__name__}")
        if check is not None:
            msg = check(v)
            if msg:
                raise self.error(path + (key,), msg)
        return float(v) if typ == (int, float) else v


NUM = (int, float)


def _positive(v) -> str | None:
    return None if v > 0 else "must be > 0"


def _non_negative(v) -> str | None:
    return None if v >= 0 else "must be >= 0"


def _ident(v) -> str | None:
    if not _ID_RE.match(v):
        return "identifiers use lowercase letters, digits, '.', '_' and '-'"
    if v == COORDINATOR:
        return f"{COORDINATOR!r} is reserved"
    return None


def _congestion(r: _Reader, value: Any, path: Path_) -> CongestionSchedule:
    windows = []
    for i, w in enumerate(r.seq(value, path)):
        p = path + (i,)
        m = r.mapping(w, p, ("start_ms", "end_ms", "multiplier"))
        start = r.get(m, "start_ms", p, int, check=_non_negative)
        end = r.get(m, "end_ms", p, int)
        mult = r.get(m, "multiplier", p, NUM, check=lambda v: None if v >= 1 else "must be >= 1")
        if end <= start:
            raise r.error(p + ("end_ms",), "must be greater than start_ms")
        windows.append(CongestionWindow(start, end, mult))
    for i in range(1, len(windows)):
        if windows[i].start < windows[i - 1].end:
            raise r.error(path + (i,), "windows must be sorted and non-overlapping")
    return CongestionSchedule(tuple(windows))


def _telemetry(r: _Reader, value: Any, path: Path_) -> TelemetryConfig:
    m = r.mapping(value, path, ("key", "domain", "unit", "step_ms", "generator", "anomalies"))
    domain = r.get(m, "domain", path, str, "ran", lambda v: None if v in DOMAINS else f"must be one of {DOMAINS}")
    gp = path + ("generator",)
    g = r.mapping(m.get("generator"), gp, ("base", "trend", "season_amplitude", "season_period", "noise_sigma", "length"))
    gen = GeneratorSpec(
        base=r.get(g, "base", gp, NUM, 0.0),
        trend=r.get(g, "trend", gp, NUM, 0.0),
        season_amplitude=r.get(g, "season_amplitude", gp, NUM, 0.0),
        season_period=r.get(g, "season_period", gp, int, 1, _positive),
        noise_sigma=r.get(g, "noise_sigma", gp, NUM, 0.0, _non_negative),
        length=r.get(g, "length", gp, int, 100, _positive),
    )
    rate, sigmas, min_index = None, 8.0, 20
    if m.get("anomalies") is not None:
        ap = path + ("anomalies",)
        a = r.mapping(m["anomalies"], ap, ("rate", "amplitude_sigmas", "min_index"))
        rate = r.get(a, "rate", ap, NUM, check=lambda v: None if 0 < v < 1 else "must be in (0, 1)")
        sigmas = r.get(a, "amplitude_sigmas", ap, NUM, 8.0, _positive)
        min_index = r.get(a, "min_index", ap, int, 20, _non_negative)
        if min_index >= gen.length:
            raise r.error(ap + ("min_index",), "must be smaller than the series length")
    return TelemetryConfig(
        key=r.get(m, "key", path, str),
        domain=domain,
        unit=r.get(m, "unit", path, str, "ms"),
        step_ms=r.get(m, "step_ms", path, int, 1000, _positive),
        generator=gen,
        anomaly_rate=rate,
        anomaly_sigmas=sigmas,
        anomaly_min_index=min_index,
    )


def _operator(r: _Reader, value: Any, path: Path_) -> OperatorConfig:
    m = r.mapping(value, path, ("id", "region", "link", "telemetry", "training_samples", "participates"))
    lp = path + ("link",)
    lm = r.mapping(m.get("link"), lp, ("base_latency_ms", "bandwidth_mbps", "congestion"))
    link = LinkSpec(
        base_latency_ms=r.get(lm, "base_latency_ms", lp, NUM, 10.0, _non_negative),
        bandwidth_mbps=r.get(lm, "bandwidth_mbps", lp, NUM, 100.0, _positive),
        congestion=_congestion(r, lm.get("congestion"), lp + ("congestion",)),
    )
    tp = path + ("telemetry",)
    telemetry = tuple(_telemetry(r, t, tp + (i,)) for i, t in enumerate(r.seq(m.get("telemetry"), tp)))
    keys = [t.key for t in telemetry]
    for i, k in enumerate(keys):
        if k in keys[:i]:
            raise r.error(tp + (i, "key"), f"duplicate telemetry key {k!r}")
    return OperatorConfig(
        id=r.get(m, "id", path, str, check=_ident),
        region=r.get(m, "region", path, str, "default"),
        link=link,
        telemetry=telemetry,
        training_samples=r.get(m, "training_samples", path, int, 100, _positive),
        participates=r.get(m, "participates", path, bool, True),
    )


def _scope(r: _Reader, value: Any, path: Path_, operators: Sequence[str]) -> DataScope:
    m = r.mapping(value, path, ("operator", "kind", "key"))
    op = r.get(m, "operator", path, str, "self")
    if op != "self" and op not in operators:
        raise r.error(path + ("operator",), f"unknown operator {op!r}")
    try:
        return DataScope(op, r.get(m, "kind", path, str, "kpi"), r.get(m, "key", path, str))
    except ValueError as exc:
        raise r.error(path, str(exc)) from None


def _agent(r: _Reader, value: Any, path: Path_, operators: Sequence[str]) -> AgentConfig:
    m = r.mapping(value, path, ("id", "kind", "implementation", "params", "scopes", "operators", "input", "invoke"))
    kinds = [k.value for k in AgentKind]
    kind = AgentKind(r.get(m, "kind", path, str, check=lambda v: None if v in kinds else f"must be one of {kinds}"))
    impl = r.get(m, "implementation", path, str, "reference")
    params = r.free_mapping(m.get("params"), path + ("params",))
    try:
        build_agent(kind, impl, params)
    except (TypeError, ValueError) as exc:
        raise r.error(path + ("implementation" if "implementation" in m else "params",), str(exc)) from None
    sp = path + ("scopes",)
    scopes = tuple(_scope(r, s, sp + (i,), operators) for i, s in enumerate(r.seq(m.get("scopes"), sp)))
    if kind.reads_data and not scopes:
        raise r.error(sp, f"{kind.value} agents read telemetry and must declare scopes")
    hosts = None
    if m.get("operators") is not None:
        op_path = path + ("operators",)
        hosts = tuple(r.seq(m["operators"], op_path))
        for i, h in enumerate(hosts):
            if h not in operators:
                raise r.error(op_path + (i,), f"unknown operator {h!r}")
    invoke = None
    if m.get("invoke") is not None:
        ip = path + ("invoke",)
        im = r.mapping(m["invoke"], ip, ("at_ms", "every_ms", "count", "lookback_ms"))
        invoke = InvokeConfig(
            at_ms=r.get(im, "at_ms", ip, int, check=_non_negative),
            every_ms=r.get(im, "every_ms", ip, int, 0, _non_negative),
            count=r.get(im, "count", ip, int, 1, _positive),
            lookback_ms=r.get(im, "lookback_ms", ip, int, None, _positive),
        )
    payload = r.free_mapping(m.get("input"), path + ("input",))
    return AgentConfig(
        id=r.get(m, "id", path, str, check=_ident),
        kind=kind,
        implementation=impl,
        params=params,
        scopes=scopes,
        operators=hosts,
        input=payload,
        invoke=invoke,
    )


def _workflow(r: _Reader, value: Any, path: Path_, agents: Sequence[str]) -> tuple[WorkflowEdge, ...]:
    m = r.mapping(value, path, ("edges",))
    ep = path + ("edges",)
    edges = []
    for i, e in enumerate(r.seq(m.get("edges"), ep)):
        p = ep + (i,)
        em = r.mapping(e, p, ("source", "target", "field_map", "constants"))
        src = r.get(em, "source", p, str)
        dst = r.get(em, "target", p, str)
        for name, key in ((src, "source"), (dst, "target")):
            if name not in agents:
                raise r.error(p + (key,), f"unknown agent {name!r}")
        edges.append(
            WorkflowEdge(
                src,
                dst,
                field_map=r.free_mapping(em.get("field_map"), p + ("field_map",)),
                constants=r.free_mapping(em.get("constants"), p + ("constants",)),
            )
        )
    return tuple(edges)


def _federation(r: _Reader, value: Any, path: Path_, operators: Sequence[OperatorConfig]) -> FederationConfig:
    allowed = (
        "rounds", "dp", "masking", "deadline_ms", "start_ms", "interval_ms", "lookahead_ms", "congestion",
        "local_epochs", "lr", "eval_samples", "task", "required", "dropouts",
    )
    m = r.mapping(value, path, allowed)
    dp_path = path + ("dp",)
    dp = r.mapping(m.get("dp"), dp_path, ("clip", "sigma"))
    tp = path + ("task",)
    task = r.mapping(m.get("task"), tp, ("w", "b", "noise_sigma"))
    ids = [o.id for o in operators]
    dropouts: dict[str, tuple[int, ...]] = {}
    dpath = path + ("dropouts",)
    for op, rounds in r.mapping(m.get("dropouts"), dpath, ids).items():
        dropouts[op] = tuple(int(x) for x in r.seq(rounds, dpath + (op,)))
    cfg = FederationConfig(
        rounds=r.get(m, "rounds", path, int, 0, _non_negative),
        clip=r.get(dp, "clip", dp_path, NUM, 1.0, _positive),
        sigma=r.get(dp, "sigma", dp_path, NUM, 0.0, _non_negative),
        masking=r.get(m, "masking", path, bool, True),
        deadline_ms=r.get(m, "deadline_ms", path, int, 60_000, _positive),
        start_ms=r.get(m, "start_ms", path, int, 0, _non_negative),
        interval_ms=r.get(m, "interval_ms", path, int, 0, _non_negative),
        lookahead_ms=r.get(m, "lookahead_ms", path, int, 3_600_000, _non_negative),
        congestion=_congestion(r, m.get("congestion"), path + ("congestion",)),
        local_epochs=r.get(m, "local_epochs", path, int, 10, _positive),
        lr=r.get(m, "lr", path, NUM, 0.2, _positive),
        eval_samples=r.get(m, "eval_samples", path, int, 200, _positive),
        task_w=r.get(task, "w", tp, NUM, 3.0),
        task_b=r.get(task, "b", tp, NUM, 0.0),
        task_noise=r.get(task, "noise_sigma", tp, NUM, 0.1, _non_negative),
        required=r.get(m, "required", path, bool, True),
        dropouts=dropouts,
    )
    participants = [o for o in operators if o.participates]
    if cfg.rounds > 0 and not participants:
        raise r.error(path, "federation rounds need at least one participating operator")
    if cfg.rounds > 0 and cfg.masking and len(participants) < 2:
        raise r.error(
            path + ("masking",) if "masking" in m else path,
            f"masking requires at least 2 participating operators, found {len(participants)}",
        )
    return cfg


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ScenarioError(
            f"YAML parse error: {getattr(exc, 'problem', None) or exc}", "", mark.line + 1 if mark else None, source
        ) from None
    r = _Reader(_node_lines(root), source)
    m = r.mapping(data, (), ("name", "seed", "duration_ms", "operators", "agents", "workflows", "federation", "reporting"))
    op_values = r.seq(m.get("operators"), ("operators",))
    if not op_values:
        raise r.error(("operators",), "at least one operator is required")
    operators = []
    for i, o in enumerate(op_values):
        op = _operator(r, o, ("operators", i))
        if any(prev.id == op.id for prev in operators):
            raise r.error(("operators", i, "id"), f"duplicate operator id {op.id!r}")
        operators.append(op)
    ids = [o.id for o in operators]
    agents = []
    for i, a in enumerate(r.seq(m.get("agents"), ("agents",))):
        ag = _agent(r, a, ("agents", i), ids)
        if any(prev.id == ag.id for prev in agents):
            raise r.error(("agents", i, "id"), f"duplicate agent id {ag.id!r}")
        agents.append(ag)
    agent_ids = [a.id for a in agents]
    workflows = tuple(
        _workflow(r, w, ("workflows", i), agent_ids) for i, w in enumerate(r.seq(m.get("workflows"), ("workflows",)))
    )
    rep = r.mapping(m.get("reporting"), ("reporting",), ("include_weights",))
    return ScenarioConfig(
        name=r.get(m, "name", (), str, "scenario"),
        seed=r.get(m, "seed", (), int, 0),
        duration_ms=r.get(m, "duration_ms", (), int, 600_000, _positive),
        operators=tuple(operators),
        agents=tuple(agents),
        workflows=workflows,
        federation=_federation(r, m.get("federation"), ("federation",), operators),
        reporting=ReportingConfig(r.get(rep, "include_weights", ("reporting",), bool, True)),
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    return parse_scenario(p.read_text(encoding="utf-8"), str(p))


# -- execution -----------------------------------------------------------------


@dataclass
class DetectionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def recall(self) -> float | None:
        pos = self.tp + self.fn
        return self.tp / pos if pos else None

    @property
    def false_positive_rate(self) -> float | None:
        neg = self.fp + self.tn
        return self.fp / neg if neg else None

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "recall": self.recall,
            "false_positive_rate": self.false_positive_rate,
        }


@dataclass
class ScenarioResult:
    report: dict
    rounds: list[RoundRecord]
    losses: list[float]
    detection: dict[str, DetectionCounts]
    violations: list[TraceRecord]
    audited_violations: list[TraceRecord]
    ledger: Ledger
    sim: Simulator
    final_model: GlobalModel
    agent_errors: list[str]

    @property
    def violation_count(self) -> int:
        return len(self.violations)

    @property
    def trace_digest(self) -> str:
        return self.report["trace_digest"]

    @property
    def report_digest(self) -> str:
        return self.report["report_digest"]

    @property
    def aborted_required(self) -> list[int]:
        return [r.round_id for r in self.rounds if r.aborted] if self.report["federation_required"] else []

    @property
    def exit_code(self) -> int:
        """0 iff the run had no sovereignty violations and no aborted required rounds, else 3."""
        return 0 if not self.violations and not self.aborted_required else 3

    def rounds_csv(self) -> str:
        lines = ["round_id,status,base_version,version,participants,received,start_ms,end_ms,eval_loss,attribution_method"]
        lines.append(f"0,initial,,{self.rounds[0].base_version if self.rounds else self.final_model.version},,,,,{self.losses[0]!r},")
        for r in self.rounds:
            lines.append(
                f"{r.round_id},{r.status},{r.base_version},{r.version},{len(r.participants)},{len(r.received)},"
                f"{r.start},{r.end},{r.eval_loss!r},{r.attribution_method}"
            )
        return "\n".join(lines) + "\n"


def report_digest(report: Mapping[str, Any]) -> str:
    body = {k: v for k, v in report.items() if k != "report_digest"}
    return codec.digest(json.dumps(body, sort_keys=True, separators=(",", ":")).encode()).hex()


def _trace_dict(r: TraceRecord) -> dict:
    return {"time": r.time, "src": r.src, "dst": r.dst, "kind": r.kind, "size": r.size, "digest": r.digest.hex()}


class _Run:
    """Mutable state of one scenario execution."""

    def __init__(self, cfg: ScenarioConfig) -> None:
        self.cfg = cfg
        self.sim = Simulator()
        self.network = Network(self.sim, {o.id: o.link for o in cfg.operators})
        self.ledger = Ledger()
        self.schemas = SchemaRegistry()
        register_record_schemas(self.schemas)
        register_agent_schemas(self.schemas)
        self.publisher = Signer.from_seed(cfg.seed, "publisher")
        self.kernels: dict[str, Kernel] = {}
        self.truth: dict[tuple[str, str], set[int]] = {}
        self.detection: dict[str, DetectionCounts] = {}
        self.agent_errors: list[str] = []
        self.windows: dict[tuple[str, str], KpiWindow] = {}

    def egress(self, kernel: Kernel):
        def send(src: str, dst: str, kind: str, data: bytes):
            outcome = self.network.send_bytes(src, dst, kind, data)
            if isinstance(outcome, Blocked):
                kernel._audit("violation", src, codec.enc_str(f"blocked {kind} to {dst}") + codec.digest(data))
            return outcome

        return send

    def build_operators(self) -> None:
        seed = self.cfg.seed
        for op in self.cfg.operators:
            store = TelemetryStore(op.id)
            for t in op.telemetry:
                spec = replace(t.generator, seed=derive_seed(seed, "telemetry", op.id, t.key))
                window = generate_kpi_series(spec, t.key, step_ms=t.step_ms)
                if t.anomaly_rate is not None:
                    window, idx = inject_anomalies(
                        window, t.anomaly_rate, t.anomaly_sigmas, spec.noise_sigma,
                        derive_seed(seed, "anomalies", op.id, t.key), t.anomaly_min_index,
                    )
                    self.truth[(op.id, t.key)] = {window.points[i][0] for i in idx}
                else:
                    self.truth[(op.id, t.key)] = set()
                self.windows[(op.id, t.key)] = window
                store.extend(window_records(op.id, t.domain, window, t.unit))
            kernel = Kernel(
                op.id, self.schemas, store, self.ledger, Signer.from_seed(seed, f"kernel:{op.id}"), clock=lambda: self.sim.now
            )
            kernel.egress = self.egress(kernel)
            kernel.subscribe("*", self.forward(kernel))
            self.kernels[op.id] = kernel

    def forward(self, kernel: Kernel):
        def handle(env) -> None:
            self.network.send_bytes(kernel.operator, COORDINATOR, "insight", env.message.encode())

        return handle

    def register_agents(self) -> None:
        for ag in self.cfg.agents:
            for op in ag.operators or [o.id for o in self.cfg.operators]:
                desc = make_descriptor(ag.id, ag.kind, self.publisher, ag.scopes)
                self.kernels[op].register_agent(desc, build_agent(ag.kind, ag.implementation, ag.params))
        for edges in self.cfg.workflows:
            nodes = tuple(dict.fromkeys([n for e in edges for n in (e.source, e.target)]))
            for op, kernel in self.kernels.items():
                if all(kernel.agents.get(f"{n}@1.0") for n in nodes):
                    kernel.compose_workflow(WorkflowSpec(nodes, edges))

    def schedule_invocations(self) -> None:
        for ag in self.cfg.agents:
            if ag.invoke is None:
                continue
            for op in ag.operators or [o.id for o in self.cfg.operators]:
                for k in range(ag.invoke.count):
                    t = ag.invoke.at_ms + k * ag.invoke.every_ms
                    self.sim.schedule_at(t, self._invocation(op, ag, t), f"invoke:{op}:{ag.id}")

    def _invocation(self, op: str, ag: AgentConfig, t: int):
        def fire() -> None:
            kernel = self.kernels[op]
            payload = dict(ag.input)
            if ag.kind.reads_data and "to_ts" not in payload:
                payload["to_ts"] = t
                payload["from_ts"] = max(0, t - ag.invoke.lookback_ms) if ag.invoke.lookback_ms else 0
            try:
                insight = kernel.invoke(ag.id, payload, publish=True, cascade=kernel.bus.new_cascade())
            except (KernelError, TelcoFedError) as exc:
                self.agent_errors.append(f"{t} {op} {ag.id}: {exc}")
                return
            if ag.kind is AgentKind.ANOMALY_DETECTOR:
                self._score_detection(op, ag.id, insight.payload)

        return fire

    def _score_detection(self, op: str, agent_id: str, out: Mapping[str, Any]) -> None:
        window = self.windows.get((op, out["key"]))
        if window is None:
            return
        pts = [t for t, _ in window.points if out["from_ts"] <= t < out["to_ts"]]
        evaluable = set(pts[out["window"]:])
        truth = self.truth[(op, out["key"])] & evaluable
        flagged = {int(t) for t in out["anomaly_timestamps"]} & evaluable
        c = self.detection.setdefault(agent_id, DetectionCounts())
        c.tp += len(flagged & truth)
        c.fp += len(flagged - truth)
        c.fn += len(truth - flagged)
        c.tn += len(evaluable - truth - flagged)

    def run_federation(self) -> tuple[Coordinator, list[RoundRecord]]:
        fed = self.cfg.federation
        seed = self.cfg.seed
        eval_set = make_regression_data(
            fed.eval_samples, derive_seed(seed, "eval"), fed.task_w, fed.task_b, fed.task_noise
        )
        coord = Coordinator(
            self.network, self.ledger, Signer.from_seed(seed, "coordinator"), GlobalModel(0, (0.0, 0.0)), eval_set, seed
        )
        participants = {
            o.id: Participant.create(
                o.id,
                make_regression_data(o.training_samples, derive_seed(seed, "train", o.id), fed.task_w, fed.task_b, fed.task_noise),
                seed,
            )
            for o in self.cfg.operators
            if o.participates
        }
        round_cfg = RoundConfig(
            clip=fed.clip, sigma=fed.sigma, masking=fed.masking, deadline_ms=fed.deadline_ms,
            lookahead_ms=fed.lookahead_ms, local_epochs=fed.local_epochs, lr=fed.lr,
        )
        op_schedules = {o.id: o.link.congestion for o in self.cfg.operators}
        records = []
        for rnd in range(1, fed.rounds + 1):
            now = max(self.sim.now, fed.start_ms) if rnd == 1 else self.sim.now + fed.interval_ms
            plan = plan_round(coord.model, list(participants), fed.congestion, now, round_cfg, rnd, op_schedules)
            for op, p in participants.items():
                p.online = rnd not in fed.dropouts.get(op, ())
            _, _, rec = coord.run_round(plan, participants)
            records.append(rec)
        return coord, records

    def execute(self) -> ScenarioResult:
        self.build_operators()
        self.register_agents()
        self.schedule_invocations()
        coord, records = self.run_federation()
        # Federation rounds drive the clock themselves; leftover events stop at the horizon.
        self.sim.run(until=self.cfg.duration_ms)
        for kernel in self.kernels.values():
            self.agent_errors.extend(f"workflow {kernel.operator}: {e}" for e in kernel.workflow_errors)
        return self.result(coord, records)

    def result(self, coord: Coordinator, records: list[RoundRecord]) -> ScenarioResult:
        live = list(self.network.violations)
        audited = audit_trace(self.sim.trace)
        fed = self.cfg.federation
        losses = coord.losses()
        report: dict[str, Any] = {
            "tool": "telcofed",
            "tool_version": telcofed.__version__,
            "scenario": self.cfg.name,
            "seed": self.cfg.seed,
            "operators": [o.id for o in self.cfg.operators],
            "losses": losses,
            "rounds": [r.to_dict() for r in records],
            "federation_required": fed.required,
            "final_version": coord.model.version,
            "detection": {k: v.to_dict() for k, v in sorted(self.detection.items())},
            "violation_count": len(live),
            "violations": [_trace_dict(v) for v in live],
            "audited_violation_count": len(audited),
            "agent_errors": list(self.agent_errors),
            "ledger_length": len(self.ledger),
            "ledger_head": self.ledger.entries[-1].entry_hash.hex() if self.ledger.entries else "",
            "event_count": self.sim.processed,
            "messages_sent": self.network.sent,
            "messages_delivered": self.network.delivered,
            "trace_digest": self.sim.trace_digest(),
        }
        if self.cfg.reporting.include_weights:
            report["final_weights"] = list(coord.model.weights)
        report["report_digest"] = report_digest(report)
        return ScenarioResult(
            report=report,
            rounds=records,
            losses=losses,
            detection=self.detection,
            violations=live,
            audited_violations=audited,
            ledger=self.ledger,
            sim=self.sim,
            final_model=coord.model,
            agent_errors=self.agent_errors,
        )


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> ScenarioResult:
    """Execute ``cfg`` (optionally with a different seed) and collect its report."""
    return _Run(cfg if seed is None else cfg.with_seed(seed)).execute()
