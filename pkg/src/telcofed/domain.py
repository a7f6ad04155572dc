"""Identifiers, versioned schemas and payload validation."""

from __future__ import annotations

import json
import math
import re
import threading
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Literal

from telcofed import codec
from telcofed.errors import (
    SchemaConflictError,
    SchemaError,
    UnknownSchemaError,
)

UNITS = frozenset({"ms", "s", "mbps", "kbps", "percent", "ratio", "count", "dimensionless"})

ViolationReason = Literal["missing", "wrong-type", "wrong-unit", "unknown-field"]

_TOKEN_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$")


class SemanticType(str, Enum):
    NUMBER = "number"
    INTEGER = "integer"
    STRING = "string"
    BOOLEAN = "boolean"
    TIMESTAMP = "timestamp"
    NUMBER_LIST = "list-of-number"


@dataclass(frozen=True)
class OperatorId:
    id: str
    region: str = ""

    def __post_init__(self) -> None:
        if not self.id or not _TOKEN_RE.match(self.id):
            raise ValueError(f"invalid operator id: {self.id!r}")

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Quantity:
    """A number tagged with its unit, for fields whose unit must be checked."""

    value: float
    unit: str


@dataclass(frozen=True)
class FieldDef:
    name: str
    type: SemanticType
    required: bool = True
    unit: str = "dimensionless"

    def __post_init__(self) -> None:
        object.__setattr__(self, "type", SemanticType(self.type))
        if not self.name:
            raise SchemaError("field name must be non-empty")
        if self.unit not in UNITS:
            raise SchemaError(f"field {self.name!r}: unknown unit {self.unit!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "type": self.type.value,
            "required": self.required,
            "unit": self.unit,
        }


@dataclass(frozen=True, order=True)
class SchemaRef:
    name: str
    major: int
    minor: int

    def __str__(self) -> str:
        return f"{self.name}@{self.major}.{self.minor}"

    @classmethod
    def parse(cls, text: str) -> SchemaRef:
        name, sep, version = text.rpartition("@")
        major, dot, minor = version.partition(".")
        if not sep or not dot or not major.isdigit() or not minor.isdigit():
            raise ValueError(f"malformed schema reference: {text!r}")
        return cls(name, int(major), int(minor))

    def encode(self) -> bytes:
        return codec.enc_str(self.name) + codec.enc_int(self.major) + codec.enc_int(self.minor)


@dataclass(frozen=True)
class SchemaDef:
    name: str
    version: tuple[int, int]
    fields: tuple[FieldDef, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields", tuple(self.fields))
        object.__setattr__(self, "version", tuple(self.version))
        if not self.name:
            raise SchemaError("schema name must be non-empty")
        if len(self.version) != 2 or any(
            not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in self.version
        ):
            raise SchemaError(f"schema {self.name!r}: bad version {self.version!r}")
        names = [f.name for f in self.fields]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"schema {self.name!r}: duplicate fields {dupes}")

    @property
    def ref(self) -> SchemaRef:
        return SchemaRef(self.name, *self.version)

    def field(self, name: str) -> FieldDef | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "version": list(self.version),
            "fields": [f.to_dict() for f in self.fields],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SchemaDef:
        try:
            fields = tuple(
                FieldDef(
                    name=f["name"],
                    type=f["type"],
                    required=bool(f.get("required", True)),
                    unit=f.get("unit", "dimensionless"),
                )
                for f in data["fields"]
            )
            version = data["version"]
            if isinstance(version, str):
                major, _, minor = version.partition(".")
                version = (int(major), int(minor or 0))
            return cls(name=data["name"], version=tuple(version), fields=fields)
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc


@dataclass(frozen=True, order=True)
class ContractViolation:
    field: str
    reason: ViolationReason


@dataclass(frozen=True, order=True)
class BreakingChange:
    field: str
    change: str
    detail: str = ""


def freeze_payload(payload: Mapping[str, Any]) -> Mapping[str, Any]:
    """Read-only copy of a payload with lists turned into tuples."""
    return MappingProxyType(
        {k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()}
    )


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_value(fd: FieldDef, value: Any) -> ViolationReason | None:
    t = fd.type
    if t is SemanticType.NUMBER:
        if isinstance(value, Quantity):
            if not _is_number(value.value):
                return "wrong-type"
            return None if value.unit == fd.unit else "wrong-unit"
        return None if _is_number(value) else "wrong-type"
    if t is SemanticType.INTEGER:
        return None if isinstance(value, int) and not isinstance(value, bool) else "wrong-type"
    if t is SemanticType.TIMESTAMP:
        ok = isinstance(value, int) and not isinstance(value, bool) and value >= 0
        return None if ok else "wrong-type"
    if t is SemanticType.STRING:
        return None if isinstance(value, str) else "wrong-type"
    if t is SemanticType.BOOLEAN:
        return None if isinstance(value, bool) else "wrong-type"
    if isinstance(value, (list, tuple)) and all(_is_number(v) for v in value):
        return None
    return "wrong-type"


def validate_against(schema: SchemaDef, payload: Mapping[str, Any]) -> list[ContractViolation]:
    """Violations of ``payload`` against ``schema``, sorted by field name."""
    out: list[ContractViolation] = []
    for fd in schema.fields:
        value = payload.get(fd.name)
        if value is None:
            if fd.required:
                out.append(ContractViolation(fd.name, "missing"))
            continue
        reason = _check_value(fd, value)
        if reason:
            out.append(ContractViolation(fd.name, reason))
    known = {fd.name for fd in schema.fields}
    out.extend(ContractViolation(k, "unknown-field") for k in payload if k not in known)
    return sorted(out)


def encode_payload(schema: SchemaDef, payload: Mapping[str, Any]) -> bytes:
    """Canonical bytes of a (valid) payload: schema ref, then fields in declaration order.

    Each field is a presence flag followed by its value when present.
    """
    parts = [schema.ref.encode()]
    for fd in schema.fields:
        value = payload.get(fd.name)
        if value is None:
            parts.append(codec.enc_bool(False))
            continue
        parts.append(codec.enc_bool(True))
        if isinstance(value, Quantity):
            value = value.value
        t = fd.type
        if t is SemanticType.NUMBER:
            parts.append(codec.enc_float(value))
        elif t in (SemanticType.INTEGER, SemanticType.TIMESTAMP):
            parts.append(codec.enc_int(value))
        elif t is SemanticType.STRING:
            parts.append(codec.enc_str(value))
        elif t is SemanticType.BOOLEAN:
            parts.append(codec.enc_bool(value))
        else:
            parts.append(codec.enc_floats(value))
    return b"".join(parts)


def check_compatibility(old: SchemaDef, new: SchemaDef) -> list[BreakingChange]:
    """Breaking changes going from ``old`` to ``new``; an empty list means compatible.

    A revision is compatible when it keeps the major version, does not lower
    the minor version, and only adds optional fields or relaxes required
    fields to optional. Identical definitions are trivially compatible.
    """
    if old.name != new.name:
        raise SchemaError(f"cannot compare schema {old.name!r} with {new.name!r}")
    changes: list[BreakingChange] = []
    (omaj, omin), (nmaj, nmin) = old.version, new.version
    if nmaj != omaj:
        changes.append(BreakingChange("", "major-version", f"{omaj} -> {nmaj}"))
    elif nmin < omin or (nmin == omin and old != new):
        changes.append(BreakingChange("", "minor-version", f"{omin} -> {nmin}"))
    for ofd in old.fields:
        nfd = new.field(ofd.name)
        if nfd is None:
            changes.append(BreakingChange(ofd.name, "removed"))
            continue
        if nfd.type is not ofd.type:
            changes.append(
                BreakingChange(ofd.name, "retyped", f"{ofd.type.value} -> {nfd.type.value}")
            )
        if nfd.unit != ofd.unit:
            changes.append(BreakingChange(ofd.name, "unit-changed", f"{ofd.unit} -> {nfd.unit}"))
        if nfd.required and not ofd.required:
            changes.append(BreakingChange(ofd.name, "became-required"))
    for nfd in new.fields:
        if old.field(nfd.name) is None and nfd.required:
            changes.append(BreakingChange(nfd.name, "added-required"))
    return sorted(changes)


@dataclass
class SchemaRegistry:
    """Registered schemas keyed by (name, version).

    Lookups read an immutable snapshot; registrations swap in a new snapshot
    under a lock, so readers never block.
    """

    _schemas: Mapping[SchemaRef, SchemaDef] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def register(self, schema: SchemaDef) -> SchemaRef:
        ref = schema.ref
        with self._lock:
            existing = self._schemas.get(ref)
            if existing is not None:
                if existing != schema:
                    raise SchemaConflictError(f"{ref} is already registered with a different body")
                return ref
            snapshot = dict(self._schemas)
            snapshot[ref] = schema
            self._schemas = MappingProxyType(snapshot)
        return ref

    def register_all(self, schemas: Iterable[SchemaDef]) -> list[SchemaRef]:
        return [self.register(s) for s in schemas]

    def get(self, ref: SchemaRef) -> SchemaDef:
        try:
            return self._schemas[ref]
        except KeyError:
            raise UnknownSchemaError(str(ref)) from None

    def __contains__(self, ref: object) -> bool:
        return ref in self._schemas

    def __len__(self) -> int:
        return len(self._schemas)

    def refs(self) -> list[SchemaRef]:
        return sorted(self._schemas)

    def validate_payload(self, ref: SchemaRef, payload: Mapping[str, Any]) -> list[ContractViolation]:
        """Empty list when ``payload`` conforms to the schema behind ``ref``."""
        return validate_against(self.get(ref), payload)

    def encode(self, ref: SchemaRef, payload: Mapping[str, Any]) -> bytes:
        return encode_payload(self.get(ref), payload)

    def export(self) -> str:
        """All schemas as one canonical JSON document with sorted keys."""
        docs = [self._schemas[r].to_dict() for r in self.refs()]
        return json.dumps(docs, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_export(cls, text: str) -> SchemaRegistry:
        registry = cls()
        registry.register_all(SchemaDef.from_dict(d) for d in json.loads(text))
        return registry


def is_finite_number(value: Any) -> bool:
    return _is_number(value) and math.isfinite(value)
