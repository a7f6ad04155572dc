"""Exception hierarchy shared across the package."""

from __future__ import annotations

from collections.abc import Sequence
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from telcofed.domain import ContractViolation


class TelcoFedError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(TelcoFedError, ValueError):
    """Malformed schema definition."""


class SchemaConflictError(SchemaError):
    """A different body is already registered under the same name and version."""


class UnknownSchemaError(TelcoFedError, KeyError):
    def __str__(self) -> str:
        return f"unknown schema: {self.args[0]}"


class ContractViolationError(TelcoFedError, ValueError):
    """A payload failed validation; ``violations`` lists every problem."""

    def __init__(self, violations: Sequence[ContractViolation], context: str = "") -> None:
        self.violations = list(violations)
        detail = ", ".join(f"{v.field}: {v.reason}" for v in self.violations)
        super().__init__(f"{context}: {detail}" if context else detail)


class UnknownKindError(TelcoFedError, ValueError):
    pass


class UnitError(TelcoFedError, ValueError):
    pass
