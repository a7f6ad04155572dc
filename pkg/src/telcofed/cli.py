"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 runtime failure,
3 verification or certification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

import yaml

from telcofed import __version__
from telcofed.ledger import LedgerImportError, import_ledger, parse_keys, verify_chain

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_VERIFICATION = 3

OUTPUT_FILES = ("report.json", "rounds.csv", "ledger.txt", "trace.txt")


def _err(msg: str) -> None:
    print(f"telcofed: {msg}", file=sys.stderr)


def _write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_validate(args: argparse.Namespace) -> int:
    from telcofed.simnet.scenario import ScenarioError, load_scenario

    try:
        cfg = load_scenario(args.scenario)
    except OSError as exc:
        _err(f"cannot read scenario: {exc}")
        return EXIT_RUNTIME
    except ScenarioError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    print(f"{args.scenario}: ok ({len(cfg.operators)} operators, {len(cfg.agents)} agents, {cfg.federation.rounds} rounds)")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    from telcofed.simnet.scenario import ScenarioError, load_scenario, run_scenario

    try:
        cfg = load_scenario(args.scenario)
    except OSError as exc:
        _err(f"cannot read scenario: {exc}")
        return EXIT_RUNTIME
    except ScenarioError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    try:
        result = run_scenario(cfg, args.seed)
    except Exception as exc:  # noqa: BLE001 - any failure inside the run is a runtime failure
        _err(f"run failed: {type(exc).__name__}: {exc}")
        return EXIT_RUNTIME

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", result.report)
    (out / "rounds.csv").write_text(result.rounds_csv(), encoding="utf-8")
    (out / "ledger.txt").write_text(result.ledger.export(), encoding="utf-8")
    (out / "ledger.keys").write_text(result.ledger.export_keys(), encoding="utf-8")
    (out / "trace.txt").write_text(result.sim.export_trace(), encoding="utf-8")

    r = result.report
    print(f"scenario {r['scenario']} seed {r['seed']}: final model v{r['final_version']}, loss {r['losses'][-1]:.6g}")
    print(f"events {r['event_count']}, ledger entries {r['ledger_length']}, sovereignty violations {r['violation_count']}")
    print(f"report digest {r['report_digest']}")
    print(f"trace digest  {r['trace_digest']}")
    if result.violations:
        for v in result.violations:
            _err(f"sovereignty violation at t={v.time}: {v.kind} {v.src} -> {v.dst} ({v.size} bytes)")
    if result.aborted_required:
        _err(f"required federation rounds aborted: {result.aborted_required}")
    return result.exit_code


def _default_keys(path: Path) -> Path:
    return path.with_suffix(".keys")


def cmd_ledger_verify(args: argparse.Namespace) -> int:
    path = Path(args.path)
    try:
        # Undecodable bytes become U+FFFD, which no canonical line contains.
        text = path.read_bytes().decode("utf-8", errors="replace")
    except OSError as exc:
        _err(f"cannot read ledger: {exc}")
        return EXIT_RUNTIME
    try:
        entries = import_ledger(text)
    except LedgerImportError as exc:
        print(f"FAIL: malformed entry; first bad index {exc.index}")
        _err(str(exc))
        return EXIT_VERIFICATION
    if not entries:
        print("OK: empty ledger")
        return EXIT_OK
    keys_path = Path(args.keys) if args.keys else _default_keys(path)
    try:
        keys = parse_keys(keys_path.read_text(encoding="utf-8"))
    except OSError as exc:
        _err(f"cannot read public keys ({keys_path}): {exc}")
        return EXIT_RUNTIME
    except ValueError as exc:
        _err(f"malformed keys file {keys_path}: {exc}")
        return EXIT_VALIDATION
    bad = verify_chain(entries, keys)
    if bad is not None:
        print(f"FAIL: first bad index {bad}")
        return EXIT_VERIFICATION
    print(f"OK: {len(entries)} entries verified")
    return EXIT_OK


def _load_mapping(path: str | None, what: str) -> dict[str, Any]:
    if not path:
        return {}
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{what} file must contain a mapping")
    return data


def cmd_certify(args: argparse.Namespace) -> int:
    from telcofed.certification import CertificationError, SuiteConfig, certify

    try:
        params = _load_mapping(args.params, "params")
        suite = SuiteConfig.from_mapping(_load_mapping(args.suite, "suite"))
    except OSError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    except (ValueError, TypeError, yaml.YAMLError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    try:
        report = certify(args.kind, args.impl, params, suite)
    except CertificationError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "certification.json", report.to_dict())
    for v in report.verdicts:
        print(f"{v.name:22s} {'PASS' if v.passed else 'FAIL'}  {v.detail}")
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_VERIFICATION


def build_parser() -> argparse.ArgumentParser:
    from telcofed.agents.reference import FAULTY_AGENTS
    from telcofed.kernel.contracts import AgentKind

    parser = argparse.ArgumentParser(prog="telcofed", description="Federated telco agent platform simulator.")
    parser.add_argument("--version", action="version", version=f"telcofed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario and write its report, metrics, ledger and trace")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="load and validate a scenario without running it")
    p.add_argument("--scenario", required=True, help="scenario YAML file")
    p.set_defaults(func=cmd_validate)

    ledger = sub.add_parser("ledger", help="ledger tools")
    lsub = ledger.add_subparsers(dest="ledger_command", required=True)
    p = lsub.add_parser("verify", help="verify an exported ledger")
    p.add_argument("path", help="exported ledger file")
    p.add_argument("--keys", default=None, help="public keys file (default: <path> with suffix .keys)")
    p.set_defaults(func=cmd_ledger_verify)

    p = sub.add_parser("certify", help="run the five-test certification suite on an agent")
    p.add_argument("--kind", required=True, choices=[k.value for k in AgentKind])
    p.add_argument("--impl", default="reference", choices=["reference", *FAULTY_AGENTS], help="implementation to certify")
    p.add_argument("--params", default=None, help="YAML/JSON file with constructor parameters")
    p.add_argument("--suite", default=None, help="YAML/JSON file overriding suite settings")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_certify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
