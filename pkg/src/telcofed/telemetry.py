"""Seeded telemetry generation and the ingestion/normalization layer."""

from __future__ import annotations

import bisect
import json
import math
import threading
from collections import deque
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from telcofed.domain import (
    FieldDef,
    SchemaDef,
    SchemaRef,
    SchemaRegistry,
    SemanticType,
    validate_against,
)
from telcofed.errors import ContractViolationError, UnitError, UnknownKindError
from telcofed.rng import CounterRng

DOMAINS = ("ran", "core", "transport", "oss", "bss")
KINDS = ("kpi", "alarm", "log", "topology-edge")
NODE_TYPES = ("cell", "router", "core-function")

# source unit -> (canonical unit, multiplier, divisor)
UNIT_CONVERSIONS: dict[str, tuple[str, float, float]] = {
    "ms": ("ms", 1.0, 1.0),
    "s": ("ms", 1000.0, 1.0),
    "mbps": ("mbps", 1.0, 1.0),
    "kbps": ("mbps", 1.0, 1000.0),
    "percent": ("ratio", 1.0, 100.0),
    "ratio": ("ratio", 1.0, 1.0),
    "count": ("count", 1.0, 1.0),
    "dimensionless": ("dimensionless", 1.0, 1.0),
}


def _record_schema(kind: str, value_type: SemanticType) -> SchemaDef:
    return SchemaDef(
        name=f"telemetry.{kind}",
        version=(1, 0),
        fields=(
            FieldDef("operator", SemanticType.STRING),
            FieldDef("domain", SemanticType.STRING),
            FieldDef("kind", SemanticType.STRING),
            FieldDef("key", SemanticType.STRING),
            FieldDef("timestamp", SemanticType.TIMESTAMP),
            FieldDef("value", value_type),
            FieldDef("unit", SemanticType.STRING, required=False),
        ),
    )


RECORD_SCHEMAS: dict[str, SchemaDef] = {
    "kpi": _record_schema("kpi", SemanticType.NUMBER),
    "alarm": _record_schema("alarm", SemanticType.STRING),
    "log": _record_schema("log", SemanticType.STRING),
    "topology-edge": _record_schema("topology-edge", SemanticType.STRING),
}


@dataclass(frozen=True)
class TelemetryRecord:
    operator: str
    domain: str
    kind: str
    key: str
    timestamp: int
    value: float | str
    unit: str | None
    schema: SchemaRef

    def payload(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "operator": self.operator,
            "domain": self.domain,
            "kind": self.kind,
            "key": self.key,
            "timestamp": self.timestamp,
            "value": self.value,
        }
        if self.unit is not None:
            out["unit"] = self.unit
        return out


@dataclass(frozen=True)
class KpiWindow:
    key: str
    points: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        pts = tuple((int(t), float(v)) for t, v in self.points)
        for (a, _), (b, _) in zip(pts, pts[1:]):
            if b <= a:
                raise ValueError(f"window {self.key!r}: timestamps not strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def timestamps(self) -> list[int]:
        return [t for t, _ in self.points]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.points]

    @classmethod
    def from_values(cls, key: str, values: Iterable[float], step_ms: int = 1000, start_ms: int = 0) -> KpiWindow:
        return cls(key, tuple((start_ms + i * step_ms, float(v)) for i, v in enumerate(values)))


@dataclass(frozen=True)
class TopologyGraph:
    nodes: tuple[tuple[str, str], ...]
    edges: tuple[tuple[str, str, float], ...]

    def __post_init__(self) -> None:
        ids = {n for n, _ in self.nodes}
        if len(ids) != len(self.nodes):
            raise ValueError("duplicate node ids")
        for nid, ntype in self.nodes:
            if ntype not in NODE_TYPES:
                raise ValueError(f"node {nid!r}: unknown type {ntype!r}")
        for a, b, _ in self.edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            if a not in ids or b not in ids:
                raise ValueError(f"edge ({a}, {b}) references a missing node")

    def neighbors(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n, _ in self.nodes}
        for a, b, _ in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


@dataclass(frozen=True)
class GeneratorSpec:
    base: float = 0.0
    trend: float = 0.0
    season_amplitude: float = 0.0
    season_period: int = 1
    noise_sigma: float = 0.0
    length: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.season_period < 1:
            raise ValueError("season_period must be >= 1")
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def generate_kpi_series(spec: GeneratorSpec, key: str = "kpi", step_ms: int = 1000, start_ms: int = 0) -> KpiWindow:
    """``base + trend*t + amplitude*sin(2*pi*t/period) + N(0, sigma)`` at steps ``t = 0..length-1``.

    Noise draw ``t`` is the ``t``-th normal of ``CounterRng(spec.seed)``.
    """
    t = np.arange(spec.length, dtype=np.float64)
    values = (
        spec.base
        + spec.trend * t
        + spec.season_amplitude * np.sin(2.0 * math.pi * t / spec.season_period)
    )
    if spec.noise_sigma > 0:
        values = values + spec.noise_sigma * CounterRng(spec.seed).normals(spec.length)
    return KpiWindow.from_values(key, values.tolist(), step_ms=step_ms, start_ms=start_ms)


def anomaly_count(rate: float, length: int) -> int:
    """``ceil(rate * length)``, ignoring float noise below 1e-9."""
    return max(1, math.ceil(rate * length - 1e-9))


def inject_anomalies(
    series: KpiWindow,
    rate: float,
    amplitude_sigmas: float,
    noise_sigma: float,
    seed: int,
    min_index: int = 0,
) -> tuple[KpiWindow, list[int]]:
    """Shift ``ceil(rate * n)`` seeded positions upward by ``amplitude_sigmas * noise_sigma``.

    With ``noise_sigma == 0`` the shift is ``amplitude_sigmas`` in absolute
    units. Positions are drawn from ``[min_index, n)`` so that detectors
    with a warm-up window can see every injected point.
    """
    if not 0 < rate < 1:
        raise ValueError("rate must be in (0, 1)")
    n = len(series)
    pool = n - min_index
    k = anomaly_count(rate, n)
    if min_index < 0 or k > pool:
        raise ValueError(f"cannot place {k} anomalies in {pool} eligible positions")
    indices = [min_index + i for i in CounterRng(seed).sample_indices(pool, k)]
    shift = amplitude_sigmas * noise_sigma if noise_sigma > 0 else amplitude_sigmas
    points = list(series.points)
    for i in indices:
        ts, v = points[i]
        points[i] = (ts, v + shift)
    return KpiWindow(series.key, tuple(points)), indices


def generate_topology(n: int, avg_degree: float, seed: int) -> TopologyGraph:
    """Connected random graph: a seeded random tree plus extra seeded edges.

    Node 0 is a core function, roughly one in five of the rest are routers,
    the remainder cells. The edge count is ``max(n - 1, round(n * avg_degree / 2))``
    capped at the complete graph.
    """
    if n < 2:
        raise ValueError("topology needs at least 2 nodes")
    if avg_degree < 1:
        raise ValueError("avg_degree must be >= 1")
    rng = CounterRng(seed)
    counter = 0

    def draw(bound: int) -> int:
        nonlocal counter
        counter += 1
        return rng.below(bound, counter - 1)

    ids = [f"n{i}" for i in range(n)]
    nodes = tuple(
        (nid, "core-function" if i == 0 else "router" if i % 5 == 1 else "cell")
        for i, nid in enumerate(ids)
    )
    capacities = (100.0, 1000.0, 10000.0)
    edges: list[tuple[str, str, float]] = []
    seen: set[tuple[int, int]] = set()
    for i in range(1, n):
        j = draw(i)
        seen.add((j, i))
        edges.append((ids[j], ids[i], capacities[draw(3)]))
    target = min(max(n - 1, round(n * avg_degree / 2)), n * (n - 1) // 2)
    while len(edges) < target:
        a, b = draw(n), draw(n)
        pair = (min(a, b), max(a, b))
        if a == b or pair in seen:
            continue
        seen.add(pair)
        edges.append((ids[pair[0]], ids[pair[1]], capacities[draw(3)]))
    return TopologyGraph(nodes, tuple(edges))


def is_connected(graph: TopologyGraph) -> bool:
    adj = graph.neighbors()
    start = graph.nodes[0][0]
    seen = {start}
    queue = deque([start])
    while queue:
        for nb in adj[queue.popleft()]:
            if nb not in seen:
                seen.add(nb)
                queue.append(nb)
    return len(seen) == len(adj)


def ingest(raw: Mapping[str, Any], source_unit_hints: Mapping[str, str] | None = None) -> TelemetryRecord:
    """Normalize one raw observation into a validated, canonical-unit record.

    The source unit is ``raw["unit"]`` if present, else the hint for the
    record's key. Conversions: s -> ms, kbps -> mbps, percent -> ratio.
    """
    kind = raw.get("kind")
    if kind not in KINDS:
        raise UnknownKindError(f"unknown telemetry kind: {kind!r}")
    schema = RECORD_SCHEMAS[kind]
    payload = {k: raw[k] for k in ("operator", "domain", "kind", "key", "timestamp", "value") if k in raw}
    unit = raw.get("unit")
    if unit is None and source_unit_hints:
        unit = source_unit_hints.get(str(raw.get("key")))
    if kind == "kpi":
        unit = unit or "dimensionless"
        if unit not in UNIT_CONVERSIONS:
            raise UnitError(f"unknown unit {unit!r} for {raw.get('key')!r}")
        canonical, mul, div = UNIT_CONVERSIONS[unit]
        value = payload.get("value")
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            payload["value"] = float(value) * mul / div
        payload["unit"] = canonical
    elif unit is not None:
        payload["unit"] = unit
    violations = validate_against(schema, payload)
    if not violations and payload.get("domain") not in DOMAINS:
        raise UnknownKindError(f"unknown telemetry domain: {payload.get('domain')!r}")
    if violations:
        raise ContractViolationError(violations, f"{kind} record {raw.get('key')!r}")
    return TelemetryRecord(
        operator=payload["operator"],
        domain=payload["domain"],
        kind=kind,
        key=payload["key"],
        timestamp=payload["timestamp"],
        value=payload["value"],
        unit=payload.get("unit"),
        schema=schema.ref,
    )


def export_record(record: TelemetryRecord) -> str:
    """One line: a JSON array in fixed field order, shortest round-trip floats."""
    return json.dumps(
        [
            record.operator,
            record.domain,
            record.kind,
            record.key,
            record.timestamp,
            record.value,
            record.unit,
            str(record.schema),
        ],
        separators=(",", ":"),
        allow_nan=False,
    )


def import_record(line: str) -> TelemetryRecord:
    operator, domain, kind, key, timestamp, value, unit, schema = json.loads(line)
    record = ingest(
        {
            "operator": operator,
            "domain": domain,
            "kind": kind,
            "key": key,
            "timestamp": timestamp,
            "value": value,
            "unit": unit,
        }
    )
    if str(record.schema) != schema:
        raise ValueError(f"schema mismatch: {schema} vs {record.schema}")
    return record


def export_records(records: Iterable[TelemetryRecord]) -> str:
    return "".join(export_record(r) + "\n" for r in records)


def import_records(text: str) -> list[TelemetryRecord]:
    return [import_record(line) for line in text.splitlines() if line.strip()]


@dataclass
class TelemetryStore:
    """Operator-local store of ingested records, ordered by timestamp per series."""

    operator: str
    _series: dict[tuple[str, str], list[TelemetryRecord]] = field(default_factory=dict)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    def add(self, record: TelemetryRecord) -> None:
        if record.operator != self.operator:
            raise ValueError(f"record for {record.operator!r} offered to store of {self.operator!r}")
        with self._lock:
            series = self._series.setdefault((record.kind, record.key), [])
            stamps = [r.timestamp for r in series]
            pos = bisect.bisect_left(stamps, record.timestamp)
            if pos < len(series) and series[pos].timestamp == record.timestamp:
                raise ValueError(f"duplicate timestamp {record.timestamp} for {record.key!r}")
            series.insert(pos, record)

    def extend(self, records: Iterable[TelemetryRecord]) -> None:
        for r in records:
            self.add(r)

    def keys(self, kind: str = "kpi") -> list[str]:
        with self._lock:
            return sorted(k for knd, k in self._series if knd == kind)

    def records(self) -> Iterator[TelemetryRecord]:
        with self._lock:
            snapshot = [list(v) for _, v in sorted(self._series.items())]
        for series in snapshot:
            yield from series

    def query_window(self, key: str, from_ts: int, to_ts: int, kind: str = "kpi") -> KpiWindow:
        """Points with ``from_ts <= t < to_ts`` in timestamp order."""
        if from_ts > to_ts:
            raise ValueError(f"empty range: from {from_ts} > to {to_ts}")
        with self._lock:
            series = list(self._series.get((kind, key), ()))
        stamps = [r.timestamp for r in series]
        lo = bisect.bisect_left(stamps, from_ts)
        hi = bisect.bisect_left(stamps, to_ts)
        return KpiWindow(key, tuple((r.timestamp, float(r.value)) for r in series[lo:hi]))

    def __len__(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._series.values())


def query_window(store: TelemetryStore, key: str, from_ts: int, to_ts: int) -> KpiWindow:
    return store.query_window(key, from_ts, to_ts)


def window_records(operator: str, domain: str, window: KpiWindow, unit: str) -> list[TelemetryRecord]:
    """Ingest every point of ``window`` as a kpi record of ``operator``."""
    return [
        ingest(
            {
                "operator": operator,
                "domain": domain,
                "kind": "kpi",
                "key": window.key,
                "timestamp": t,
                "value": v,
                "unit": unit,
            }
        )
        for t, v in window.points
    ]


def register_record_schemas(registry: SchemaRegistry) -> None:
    registry.register_all(RECORD_SCHEMAS.values())


__all__ = [
    "DOMAINS",
    "KINDS",
    "GeneratorSpec",
    "KpiWindow",
    "TelemetryRecord",
    "TelemetryStore",
    "TopologyGraph",
    "export_record",
    "export_records",
    "generate_kpi_series",
    "generate_topology",
    "import_record",
    "import_records",
    "ingest",
    "inject_anomalies",
    "is_connected",
    "query_window",
]
