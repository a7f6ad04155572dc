"""Kernel-hosted reference agents, their contracts, and deliberately faulty variants."""

from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping
from typing import Any

from telcofed import codec
from telcofed.agents.anomaly import detect_anomalies
from telcofed.agents.experience import ExperienceModel, predict_experience
from telcofed.agents.forecast import holt_state
from telcofed.agents.optimization import CellState, advise_optimization
from telcofed.agents.sla import SlaPolicy, monitor_sla
from telcofed.crypto import Signer
from telcofed.domain import FieldDef, SchemaDef, SchemaRegistry, SemanticType
from telcofed.kernel.contracts import AgentDescriptor, AgentKind, DataScope, ReadRequest
from telcofed.kernel.core import AgentContext

N, I, S, B, T, L = (
    SemanticType.NUMBER,
    SemanticType.INTEGER,
    SemanticType.STRING,
    SemanticType.BOOLEAN,
    SemanticType.TIMESTAMP,
    SemanticType.NUMBER_LIST,
)


def _schema(name: str, *fields: FieldDef) -> SchemaDef:
    return SchemaDef(name, (1, 0), fields)


def _window_fields() -> tuple[FieldDef, ...]:
    return (FieldDef("key", S), FieldDef("from_ts", T), FieldDef("to_ts", T))


AGENT_SCHEMAS: dict[AgentKind, tuple[SchemaDef, SchemaDef]] = {
    AgentKind.ANOMALY_DETECTOR: (
        _schema(
            "agent.anomaly-detector.input",
            *_window_fields(),
            FieldDef("window", I, required=False),
            FieldDef("threshold", N, required=False),
        ),
        _schema(
            "agent.anomaly-detector.output",
            *_window_fields(),
            FieldDef("window", I),
            FieldDef("threshold", N),
            FieldDef("count", I),
            FieldDef("anomaly_timestamps", L),
            FieldDef("anomaly_values", L),
            FieldDef("anomaly_scores", L),
        ),
    ),
    AgentKind.EXPERIENCE_PREDICTOR: (
        _schema(
            "agent.experience-predictor.input",
            FieldDef("latency_ms", N, unit="ms"),
            FieldDef("loss_ratio", N, unit="ratio"),
            FieldDef("throughput_mbps", N, unit="mbps"),
            FieldDef("demand_mbps", N, unit="mbps"),
            FieldDef("latency_floor_ms", N, required=False, unit="ms"),
            FieldDef("latency_ceiling_ms", N, required=False, unit="ms"),
            FieldDef("loss_ceiling", N, required=False, unit="ratio"),
        ),
        _schema(
            "agent.experience-predictor.output",
            FieldDef("score", N),
            FieldDef("latency_score", N),
            FieldDef("loss_score", N),
            FieldDef("throughput_score", N),
        ),
    ),
    AgentKind.SLA_MONITOR: (
        _schema(
            "agent.sla-monitor.input",
            *_window_fields(),
            FieldDef("threshold", N),
            FieldDef("target_fraction", N, required=False),
            FieldDef("horizon", I, required=False),
        ),
        _schema(
            "agent.sla-monitor.output",
            *_window_fields(),
            FieldDef("compliant", B),
            FieldDef("observed_fraction", N),
            FieldDef("breach_predicted", B),
            FieldDef("breach_step", I, required=False),
            FieldDef("breach_timestamp", T, required=False),
            FieldDef("breach_fraction", N, required=False),
        ),
    ),
    AgentKind.OPTIMIZATION_ADVISOR: (
        _schema(
            "agent.optimization-advisor.input",
            FieldDef("loads", L),
            FieldDef("energies", L, required=False),
            FieldDef("active", L, required=False),
            FieldDef("energy_weight", N),
        ),
        _schema(
            "agent.optimization-advisor.output",
            FieldDef("action", S),
            FieldDef("utility_delta", N),
        ),
    ),
    AgentKind.CAPACITY_FORECASTER: (
        _schema(
            "agent.capacity-forecaster.input",
            *_window_fields(),
            FieldDef("horizon", I),
            FieldDef("alpha", N, required=False),
            FieldDef("beta", N, required=False),
        ),
        _schema(
            "agent.capacity-forecaster.output",
            *_window_fields(),
            FieldDef("horizon", I),
            FieldDef("forecast", L),
            FieldDef("level", N),
            FieldDef("trend", N),
        ),
    ),
}


def register_agent_schemas(registry: SchemaRegistry) -> None:
    for schemas in AGENT_SCHEMAS.values():
        registry.register_all(schemas)


def make_descriptor(
    agent_id: str,
    kind: AgentKind | str,
    publisher: Signer,
    scopes: Iterable[DataScope] = (),
    version: tuple[int, int] = (1, 0),
) -> AgentDescriptor:
    kind = AgentKind(kind)
    inp, out = AGENT_SCHEMAS[kind]
    return AgentDescriptor(agent_id, kind, version, inp.ref, out.ref, tuple(scopes)).signed_by(publisher)


def _read(payload: Mapping[str, Any], ctx: AgentContext):
    return ctx.read(ReadRequest(payload["key"], payload["from_ts"], payload["to_ts"]))


def _window_echo(payload: Mapping[str, Any]) -> dict[str, Any]:
    return {"key": payload["key"], "from_ts": payload["from_ts"], "to_ts": payload["to_ts"]}


class AnomalyDetectorAgent:
    kind = AgentKind.ANOMALY_DETECTOR

    def __init__(self, window: int = 20, threshold: float = 3.5) -> None:
        self.window = window
        self.threshold = threshold

    def detect(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        series = _read(payload, ctx)
        w = payload.get("window", self.window)
        k = payload.get("threshold", self.threshold)
        report = detect_anomalies(series, w, k)
        return {
            **_window_echo(payload),
            "window": w,
            "threshold": float(k),
            "count": len(report.anomalies),
            "anomaly_timestamps": [float(a.timestamp) for a in report.anomalies],
            "anomaly_values": [a.value for a in report.anomalies],
            "anomaly_scores": [a.score for a in report.anomalies],
        }

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        return self.detect(payload, ctx)


class AlwaysFlagDetector(AnomalyDetectorAgent):
    """Adversarial fixture: reports every scored point as anomalous."""

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        series = _read(payload, ctx)
        w = payload.get("window", self.window)
        k = float(payload.get("threshold", self.threshold))
        pts = series.points[w:]
        return {
            **_window_echo(payload),
            "window": w,
            "threshold": k,
            "count": len(pts),
            "anomaly_timestamps": [float(t) for t, _ in pts],
            "anomaly_values": [v for _, v in pts],
            "anomaly_scores": [k] * len(pts),
        }


class SchemaViolatingDetector(AnomalyDetectorAgent):
    """Adversarial fixture: omits the required ``count`` output field."""

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        out = self.detect(payload, ctx)
        del out["count"]
        return out


class RawExportingDetector(AnomalyDetectorAgent):
    """Misconfigured fixture: ships the raw window it read to the coordinator."""

    def __init__(self, window: int = 20, threshold: float = 3.5, export_to: str = "coordinator") -> None:
        super().__init__(window, threshold)
        self.export_to = export_to

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        series = _read(payload, ctx)
        ctx.send(self.export_to, "raw-telemetry", codec.enc_floats(series.values))
        return self.detect(payload, ctx)


class ExperiencePredictorAgent:
    kind = AgentKind.EXPERIENCE_PREDICTOR

    def __init__(self, model: ExperienceModel = ExperienceModel()) -> None:
        self.model = model

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        model = ExperienceModel(
            latency_floor_ms=payload.get("latency_floor_ms", self.model.latency_floor_ms),
            latency_ceiling_ms=payload.get("latency_ceiling_ms", self.model.latency_ceiling_ms),
            loss_ceiling=payload.get("loss_ceiling", self.model.loss_ceiling),
        )
        result = predict_experience(
            payload["latency_ms"],
            payload["loss_ratio"],
            payload["throughput_mbps"],
            payload["demand_mbps"],
            model,
        )
        return {
            "score": result.score,
            "latency_score": result.subscores["latency"],
            "loss_score": result.subscores["loss"],
            "throughput_score": result.subscores["throughput"],
        }


class SlaMonitorAgent:
    kind = AgentKind.SLA_MONITOR

    def __init__(self, target_fraction: float = 0.95, horizon: int = 10) -> None:
        self.target_fraction = target_fraction
        self.horizon = horizon

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        policy = SlaPolicy(
            threshold=payload["threshold"],
            target_fraction=payload.get("target_fraction", self.target_fraction),
            horizon=payload.get("horizon", self.horizon),
        )
        report = monitor_sla(_read(payload, ctx), policy)
        out: dict[str, Any] = {
            **_window_echo(payload),
            "compliant": report.compliant,
            "observed_fraction": report.observed_fraction,
            "breach_predicted": report.breach_forecast is not None,
        }
        if report.breach_forecast is not None:
            out["breach_step"] = report.breach_forecast.step
            out["breach_timestamp"] = report.breach_forecast.timestamp
            out["breach_fraction"] = report.breach_forecast.fraction_beyond
        return out


class OptimizationAdvisorAgent:
    kind = AgentKind.OPTIMIZATION_ADVISOR

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        loads = payload["loads"]
        energies = payload.get("energies") or [1.0] * len(loads)
        active = payload.get("active") or [1.0] * len(loads)
        if not len(loads) == len(energies) == len(active):
            raise ValueError("loads, energies and active must have equal length")
        cells = [CellState(load, bool(a), e) for load, e, a in zip(loads, energies, active)]
        advice = advise_optimization(cells, payload["energy_weight"])
        return {"action": advice.action, "utility_delta": advice.utility_delta}


class CapacityForecasterAgent:
    kind = AgentKind.CAPACITY_FORECASTER

    def __init__(self, alpha: float = 0.5, beta: float = 0.3) -> None:
        self.alpha = alpha
        self.beta = beta

    def __call__(self, payload: Mapping[str, Any], ctx: AgentContext) -> dict[str, Any]:
        series = _read(payload, ctx)
        h = payload["horizon"]
        if h < 1:
            raise ValueError("horizon must be >= 1")
        level, trend = holt_state(series.values, payload.get("alpha", self.alpha), payload.get("beta", self.beta))
        return {
            **_window_echo(payload),
            "horizon": h,
            "forecast": [level + i * trend for i in range(1, h + 1)],
            "level": level,
            "trend": trend,
        }


REFERENCE_AGENTS: dict[AgentKind, Callable[..., Any]] = {
    AgentKind.ANOMALY_DETECTOR: AnomalyDetectorAgent,
    AgentKind.EXPERIENCE_PREDICTOR: ExperiencePredictorAgent,
    AgentKind.SLA_MONITOR: SlaMonitorAgent,
    AgentKind.OPTIMIZATION_ADVISOR: OptimizationAdvisorAgent,
    AgentKind.CAPACITY_FORECASTER: CapacityForecasterAgent,
}

# implementation name -> (kind it impersonates, factory)
FAULTY_AGENTS: dict[str, tuple[AgentKind, Callable[..., Any]]] = {
    "always-flag": (AgentKind.ANOMALY_DETECTOR, AlwaysFlagDetector),
    "schema-violator": (AgentKind.ANOMALY_DETECTOR, SchemaViolatingDetector),
    "raw-exporter": (AgentKind.ANOMALY_DETECTOR, RawExportingDetector),
}


def build_agent(kind: AgentKind | str, implementation: str = "reference", params: Mapping[str, Any] | None = None):
    """Construct an agent implementation; ``params`` go to its constructor."""
    kind = AgentKind(kind)
    params = dict(params or {})
    if implementation == "reference":
        factory = REFERENCE_AGENTS[kind]
    elif implementation in FAULTY_AGENTS:
        impersonates, factory = FAULTY_AGENTS[implementation]
        if impersonates is not kind:
            raise ValueError(f"{implementation!r} only exists as a {impersonates.value}")
    else:
        raise ValueError(f"unknown agent implementation {implementation!r}")
    if kind is AgentKind.EXPERIENCE_PREDICTOR and params:
        return factory(ExperienceModel(**params))
    return factory(**params)
