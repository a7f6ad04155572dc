"""Five-test certification suite for agent implementations.

Each agent is registered in a fresh fixture kernel holding seeded telemetry
and then exercised by these tests:

* contract-conformance: canned inputs must yield schema-valid outputs.
* determinism: two independent runs produce identical raw-output digests.
* scope-compliance: an out-of-scope read is denied and audited, the agent
  fails with a typed error or still answers validly, the kernel keeps
  serving, and nothing raw leaves the operator.
* behavioral-benchmark: a per-kind quality bar on seeded fixtures.
* latency-budget: virtual cost of every invocation stays within budget.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from telcofed import codec
from telcofed.agents.reference import build_agent, make_descriptor, register_agent_schemas
from telcofed.benchmarks import anomaly_benchmark, score_detection
from telcofed.crypto import Signer
from telcofed.domain import SchemaRegistry
from telcofed.errors import ContractViolationError, TelcoFedError
from telcofed.kernel.contracts import AgentKind, DataScope
from telcofed.kernel.core import AgentExecutionError, Kernel, KernelError
from telcofed.ledger import Ledger
from telcofed.rng import CounterRng, derive_seed
from telcofed.telemetry import GeneratorSpec, KpiWindow, TelemetryStore, generate_kpi_series, window_records

TESTS = ("contract-conformance", "determinism", "scope-compliance", "behavioral-benchmark", "latency-budget")
FIXTURE_OPERATOR = "cert-op"
FIXTURE_PREFIX = "fixture."
OUT_OF_SCOPE_KEY = "restricted.kpi"


class CertificationError(TelcoFedError):
    """The agent could not even be registered for certification."""


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 2024
    latency_budget_ms: float = 50.0
    anomaly_series: int = 20
    anomaly_length: int = 300
    anomaly_rate: float = 0.01
    anomaly_sigmas: float = 8.0
    anomaly_min_recall: float = 0.9
    anomaly_max_fpr: float = 0.02
    forecast_series: int = 10
    forecast_fit: int = 50
    forecast_horizon: int = 10
    forecast_noise: float = 0.5
    forecast_mae_bound: float = 1.5
    tolerance: float = 1e-9

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> SuiteConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown suite settings: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class TestVerdict:
    name: str
    passed: bool
    detail: str = ""

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class CertificationReport:
    agent_id: str
    version: str
    kind: str
    implementation: str
    verdicts: tuple[TestVerdict, ...]
    metrics: Mapping[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def verdict(self, name: str) -> TestVerdict:
        return next(v for v in self.verdicts if v.name == name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "version": self.version,
            "kind": self.kind,
            "implementation": self.implementation,
            "overall": "pass" if self.passed else "fail",
            "tests": {v.name: {"verdict": "pass" if v.passed else "fail", "detail": v.detail} for v in self.verdicts},
            "metrics": dict(self.metrics),
        }


# -- fixtures ------------------------------------------------------------------


@dataclass
class _Call:
    payload: Mapping[str, Any]
    raw: Any = None
    error: str | None = None
    points_read: int = 0


class _Recorder:
    """Wraps an implementation to keep its raw output before the kernel validates it."""

    def __init__(self, impl: Any) -> None:
        self.impl = impl
        self.calls: list[_Call] = []
        self.virtual_cost_ms = getattr(impl, "virtual_cost_ms", 0.0)

    def __call__(self, payload, ctx):
        call = _Call(payload)
        self.calls.append(call)
        try:
            call.raw = self.impl(payload, ctx)
            return call.raw
        except Exception as exc:
            call.error = type(exc).__name__
            raise
        finally:
            call.points_read = ctx.points_read


def _fixture_windows(suite: SuiteConfig) -> tuple[dict[str, KpiWindow], dict[str, set[int]]]:
    """Seeded fixture series by key, plus injected anomaly indices per benchmark key."""
    seed = suite.seed
    windows: dict[str, KpiWindow] = {}
    truth: dict[str, set[int]] = {}
    windows["fixture.flat"] = KpiWindow.from_values("fixture.flat", [10.0] * 60)
    windows["fixture.high"] = KpiWindow.from_values("fixture.high", [30.0] * 60)
    windows["fixture.ramp"] = KpiWindow.from_values("fixture.ramp", [2.0 * t for t in range(50)])
    windows["fixture.noisy"] = generate_kpi_series(
        GeneratorSpec(base=20.0, noise_sigma=1.0, length=120, seed=derive_seed(seed, "noisy")), "fixture.noisy"
    )
    windows[OUT_OF_SCOPE_KEY] = KpiWindow.from_values(OUT_OF_SCOPE_KEY, [1.0] * 60)
    bench = anomaly_benchmark(
        suite.anomaly_series, suite.anomaly_length, suite.anomaly_rate, suite.anomaly_sigmas,
        seed=seed, key_prefix="fixture.bench",
    )
    for b in bench:
        windows[b.window.key] = b.window
        truth[b.window.key] = set(b.anomalies)
    n = suite.forecast_fit + suite.forecast_horizon
    for i in range(suite.forecast_series):
        rng = CounterRng(derive_seed(seed, "affine", i))
        a, b = 100.0 * rng.uniforms(2, start=0)
        b = (b - 50.0) / 25.0
        noise = suite.forecast_noise * rng.normals(n, start=2)
        key = f"fixture.trend.f{i}"
        windows[key] = KpiWindow.from_values(key, [float(a + b * t + e) for t, e in zip(range(n), noise)])
    return windows, truth


def _kernel(windows: Mapping[str, KpiWindow], seed: int) -> Kernel:
    schemas = SchemaRegistry()
    register_agent_schemas(schemas)
    store = TelemetryStore(FIXTURE_OPERATOR)
    for w in windows.values():
        store.extend(window_records(FIXTURE_OPERATOR, "ran", w, "ms"))
    kernel = Kernel(FIXTURE_OPERATOR, schemas, store, Ledger(), Signer.from_seed(seed, "cert-kernel"))
    kernel.outbound: list[tuple[str, str, str]] = []  # type: ignore[attr-defined]

    def egress(src: str, dst: str, kind: str, data: bytes):
        kernel.outbound.append((src, dst, kind))  # type: ignore[attr-defined]
        return None

    kernel.egress = egress
    return kernel


def _whole(key: str, windows: Mapping[str, KpiWindow]) -> dict[str, Any]:
    ts = windows[key].timestamps
    return {"key": key, "from_ts": ts[0], "to_ts": ts[-1] + 1}


def _canned(kind: AgentKind, windows: Mapping[str, KpiWindow]) -> list[dict[str, Any]]:
    if kind is AgentKind.ANOMALY_DETECTOR:
        return [_whole("fixture.noisy", windows), _whole("fixture.flat", windows), _whole("fixture.bench.a0", windows)]
    if kind is AgentKind.SLA_MONITOR:
        return [
            {**_whole("fixture.flat", windows), "threshold": 20.0},
            {**_whole("fixture.high", windows), "threshold": 20.0},
            {**_whole("fixture.ramp", windows), "threshold": 100.0, "target_fraction": 0.95, "horizon": 10},
        ]
    if kind is AgentKind.CAPACITY_FORECASTER:
        return [
            {**_whole("fixture.ramp", windows), "horizon": 5},
            {**_whole("fixture.noisy", windows), "horizon": 10, "alpha": 0.3, "beta": 0.1},
        ]
    if kind is AgentKind.EXPERIENCE_PREDICTOR:
        return [
            {"latency_ms": 50.0, "loss_ratio": 0.0, "throughput_mbps": 100.0, "demand_mbps": 100.0},
            {"latency_ms": 275.0, "loss_ratio": 0.0, "throughput_mbps": 100.0, "demand_mbps": 100.0},
            {"latency_ms": 600.0, "loss_ratio": 0.01, "throughput_mbps": 10.0, "demand_mbps": 50.0},
        ]
    return [
        {"loads": [0.05, 0.5], "energy_weight": 1.5},
        {"loads": [0.95, 0.2], "energy_weight": 0.0},
        {"loads": [0.5, 0.5, 0.5], "energy_weight": 0.1},
    ]


# Hand-derived expectations for the canned inputs of the stateless kinds and
# the SLA monitor; see the module tests for the arithmetic.
_EXPECTED: dict[AgentKind, list[dict[str, Any]]] = {
    AgentKind.EXPERIENCE_PREDICTOR: [
        {"score": 1.0},
        {"score": 0.5 ** (1 / 3), "latency_score": 0.5},
        {"score": 0.0, "latency_score": 0.0},
    ],
    AgentKind.OPTIMIZATION_ADVISOR: [
        {"action": "sleep(0)", "utility_delta": 0.5},
        {"action": "shift(0->1)", "utility_delta": 0.75},
        {"action": "no-op", "utility_delta": 0.0},
    ],
    AgentKind.SLA_MONITOR: [
        {"compliant": True, "observed_fraction": 1.0, "breach_predicted": False},
        {"compliant": False, "observed_fraction": 0.0},
        {"compliant": True, "breach_predicted": True, "breach_step": 1},
    ],
}


class _Harness:
    def __init__(self, kind: AgentKind, implementation: str, params: Mapping[str, Any], suite: SuiteConfig) -> None:
        self.kind = kind
        self.implementation = implementation
        self.params = dict(params)
        self.suite = suite
        self.windows, self.truth = _fixture_windows(suite)
        self.publisher = Signer.from_seed(suite.seed, "cert-publisher")
        self.agent_id = f"cert-{kind.value}"

    def fresh(self) -> tuple[Kernel, _Recorder, str]:
        kernel = _kernel(self.windows, self.suite.seed)
        try:
            impl = build_agent(self.kind, self.implementation, self.params)
        except (TypeError, ValueError) as exc:
            raise CertificationError(f"cannot build agent: {exc}") from None
        recorder = _Recorder(impl)
        scopes = (DataScope("self", "kpi", FIXTURE_PREFIX + "*"),) if self.kind.reads_data else ()
        try:
            key = kernel.register_agent(make_descriptor(self.agent_id, self.kind, self.publisher, scopes), recorder)
        except (KernelError, TelcoFedError, KeyError) as exc:
            raise CertificationError(f"agent is not registrable: {exc}") from None
        return kernel, recorder, key

    def invoke_all(self, payloads: Sequence[Mapping[str, Any]]) -> tuple[Kernel, _Recorder, list[Any]]:
        """Invoke every payload; each result is an Insight or the exception raised."""
        kernel, recorder, key = self.fresh()
        results: list[Any] = []
        for p in payloads:
            try:
                results.append(kernel.invoke(key, p))
            except (KernelError, ContractViolationError) as exc:
                results.append(exc)
        return kernel, recorder, results

    # -- the five tests --------------------------------------------------------

    def contract(self, results: Sequence[Any]) -> TestVerdict:
        bad = [f"case {i}: {type(r).__name__}: {r}" for i, r in enumerate(results) if isinstance(r, Exception)]
        if bad:
            return TestVerdict("contract-conformance", False, "; ".join(bad))
        return TestVerdict("contract-conformance", True, f"{len(results)} canned inputs produced schema-valid outputs")

    def determinism(self, payloads: Sequence[Mapping[str, Any]]) -> TestVerdict:
        digests = []
        for _ in range(2):
            _, recorder, _ = self.invoke_all(payloads)
            digests.append(_calls_digest(recorder.calls))
        if digests[0] != digests[1]:
            return TestVerdict("determinism", False, f"raw output digests differ: {digests[0][:16]} vs {digests[1][:16]}")
        return TestVerdict("determinism", True, f"two runs, raw output digest {digests[0][:16]}")

    def scope(self, payloads: Sequence[Mapping[str, Any]]) -> TestVerdict:
        kernel, recorder, key = self.fresh()
        problems = []
        if self.kind.reads_data:
            probe = {**payloads[0], **_whole(OUT_OF_SCOPE_KEY, self.windows)}
            try:
                kernel.invoke(key, probe)
                outcome = "valid output"
            except AgentExecutionError as exc:
                outcome = f"typed error ({type(exc.__cause__).__name__ if exc.__cause__ else type(exc).__name__})"
            except ContractViolationError:
                outcome = "typed error (contract)"
            except Exception as exc:  # noqa: BLE001 - anything else escaped the kernel
                problems.append(f"kernel crashed with {type(exc).__name__}")
                outcome = "crash"
            denied = [a for a in kernel.access_log if not a.granted and a.request.key == OUT_OF_SCOPE_KEY]
            audited = [r for r in kernel.audit if r.entry_type == "authorization-denied"]
            if not denied or not audited:
                problems.append("out-of-scope read was not denied and audited")
        else:
            outcome = "agent reads no telemetry"
            for p in payloads:
                try:
                    kernel.invoke(key, p)
                except (KernelError, ContractViolationError):
                    pass
        leaked = [a for a in kernel.access_log if a.granted and not a.request.key.startswith(FIXTURE_PREFIX)]
        if leaked:
            problems.append(f"{len(leaked)} reads outside the declared scope were granted")
        if not self.kind.reads_data and kernel.access_log:
            problems.append("agent without data scopes attempted telemetry reads")
        try:
            kernel.invoke(key, payloads[0])
        except (KernelError, ContractViolationError):
            pass
        except Exception as exc:  # noqa: BLE001
            problems.append(f"kernel stopped serving: {type(exc).__name__}")
        raw_out = [o for o in kernel.outbound if o[2] == "raw-telemetry" and o[1] != o[0]]  # type: ignore[attr-defined]
        if raw_out:
            problems.append(f"{len(raw_out)} raw-telemetry messages addressed off the operator")
        if problems:
            return TestVerdict("scope-compliance", False, "; ".join(problems))
        return TestVerdict("scope-compliance", True, f"out-of-scope read denied and audited; agent gave {outcome}")

    def behavioral(self, payloads: Sequence[Mapping[str, Any]], results: Sequence[Any]) -> tuple[TestVerdict, dict]:
        if self.kind is AgentKind.ANOMALY_DETECTOR:
            return self._anomaly_benchmark()
        if self.kind is AgentKind.CAPACITY_FORECASTER:
            return self._forecast_benchmark()
        expected = _EXPECTED[self.kind]
        problems = []
        for i, (want, got) in enumerate(zip(expected, results)):
            if isinstance(got, Exception):
                problems.append(f"case {i}: no valid output")
                continue
            for k, v in want.items():
                actual = got.payload.get(k)
                if isinstance(v, float) and isinstance(actual, (int, float)) and not isinstance(actual, bool):
                    ok = abs(actual - v) <= self.suite.tolerance
                else:
                    ok = actual == v
                if not ok:
                    problems.append(f"case {i}: {k}={actual!r}, expected {v!r}")
        if problems:
            return TestVerdict("behavioral-benchmark", False, "; ".join(problems)), {}
        return TestVerdict("behavioral-benchmark", True, f"{len(expected)} canned cases match"), {}

    def _anomaly_benchmark(self) -> tuple[TestVerdict, dict]:
        keys = sorted(self.truth, key=lambda k: int(k.rsplit("a", 1)[1]))
        kernel, _, key = self.fresh()
        tp = fp = fn = tn = 0
        failures = 0
        for k in keys:
            try:
                out = kernel.invoke(key, _whole(k, self.windows)).payload
            except (KernelError, ContractViolationError):
                failures += 1
                continue
            pts = self.windows[k].timestamps
            flagged = [pts.index(int(t)) for t in out["anomaly_timestamps"]]
            c = score_detection(flagged, self.truth[k], len(pts), out["window"])
            tp, fp, fn, tn = tp + c.tp, fp + c.fp, fn + c.fn, tn + c.tn
        if failures:
            return TestVerdict("behavioral-benchmark", False, f"{failures}/{len(keys)} benchmark series produced no valid output"), {}
        recall = tp / (tp + fn) if tp + fn else 1.0
        fpr = fp / (fp + tn) if fp + tn else 0.0
        metrics = {"recall": recall, "false_positive_rate": fpr, "series": len(keys)}
        ok = recall >= self.suite.anomaly_min_recall and fpr <= self.suite.anomaly_max_fpr
        detail = (
            f"recall {recall:.4f} (min {self.suite.anomaly_min_recall}), "
            f"false-positive rate {fpr:.4f} (max {self.suite.anomaly_max_fpr})"
        )
        return TestVerdict("behavioral-benchmark", ok, detail), metrics

    def _forecast_benchmark(self) -> tuple[TestVerdict, dict]:
        kernel, _, key = self.fresh()
        fit, h = self.suite.forecast_fit, self.suite.forecast_horizon
        errors = []
        for i in range(self.suite.forecast_series):
            k = f"fixture.trend.f{i}"
            pts = self.windows[k].points
            try:
                out = kernel.invoke(key, {"key": k, "from_ts": pts[0][0], "to_ts": pts[fit][0], "horizon": h}).payload
            except (KernelError, ContractViolationError):
                return TestVerdict("behavioral-benchmark", False, f"series {i} produced no valid output"), {}
            held_out = np.array([v for _, v in pts[fit : fit + h]])
            errors.append(float(np.mean(np.abs(np.asarray(out["forecast"]) - held_out))))
        mae = float(np.mean(errors))
        ok = math.isfinite(mae) and mae <= self.suite.forecast_mae_bound
        return (
            TestVerdict("behavioral-benchmark", ok, f"held-out MAE {mae:.4f} (bound {self.suite.forecast_mae_bound})"),
            {"mae": mae},
        )

    def latency(self, kernel: Kernel, recorder: _Recorder) -> TestVerdict:
        costs = [kernel.cost_model.cost(c.payload, c.points_read, recorder.virtual_cost_ms) for c in recorder.calls]
        worst = max(costs, default=0.0)
        ok = worst <= self.suite.latency_budget_ms
        return TestVerdict("latency-budget", ok, f"worst virtual cost {worst:.3f} ms (budget {self.suite.latency_budget_ms} ms)")


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float):
        return repr(value)
    return value


def _calls_digest(calls: Sequence[_Call]) -> str:
    body = [{"raw": _jsonable(c.raw), "error": c.error} for c in calls]
    return codec.digest(json.dumps(body, sort_keys=True).encode()).hex()


def certify(
    kind: AgentKind | str,
    implementation: str = "reference",
    params: Mapping[str, Any] | None = None,
    suite: SuiteConfig = SuiteConfig(),
) -> CertificationReport:
    """Run all five tests; raises :class:`CertificationError` if the agent cannot be registered."""
    kind = AgentKind(kind)
    h = _Harness(kind, implementation, params or {}, suite)
    payloads = _canned(kind, h.windows)
    kernel, recorder, results = h.invoke_all(payloads)
    behavioral, metrics = h.behavioral(payloads, results)
    verdicts = (
        h.contract(results),
        h.determinism(payloads),
        h.scope(payloads),
        behavioral,
        h.latency(kernel, recorder),
    )
    return CertificationReport(h.agent_id, "1.0", kind.value, implementation, verdicts, metrics)


# Documented outcome for each shipped adversarial fixture: test name -> passes?
EXPECTED_ADVERSARIAL_VERDICTS: dict[str, dict[str, bool]] = {
    "always-flag": {
        "contract-conformance": True,
        "determinism": True,
        "scope-compliance": True,
        "behavioral-benchmark": False,
        "latency-budget": True,
    },
    "schema-violator": {
        "contract-conformance": False,
        "determinism": True,
        "scope-compliance": True,
        "behavioral-benchmark": False,
        "latency-budget": True,
    },
}

def verdict_map(report: CertificationReport) -> dict[str, bool]:
    return {v.name: v.passed for v in report.verdicts}
