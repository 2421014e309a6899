"""Exception hierarchy shared across the package.

Each class maps to one documented failure mode so the CLI can translate
failures into stable exit codes.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .model import ValidationViolation


class MetaprovError(Exception):
    """Base class for all package errors."""


class SidecarSyntaxError(MetaprovError):
    """The sidecar document is not syntactically valid."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class RecordValidationError(MetaprovError):
    """A record violates the model invariants."""

    def __init__(self, violations: list["ValidationViolation"]):
        self.violations = violations
        detail = "; ".join(f"{v.field_path}: {v.message}" for v in violations)
        super().__init__(f"invalid record: {detail}")


class DiscoveryError(MetaprovError):
    """Version discovery failed (provider unreachable, corpus missing...)."""


class EmptyVersionSetError(DiscoveryError):
    """Discovery returned zero versions; a tree needs at least one node."""


class EnvironmentProviderError(MetaprovError):
    """The environment provider could not answer a lookup."""


class NoSharedGroupsError(MetaprovError):
    """Two clusters share no attribute group; no transform can be fitted."""


class TreeSizeError(MetaprovError):
    """Exhaustive tree search was asked for more nodes than its guard allows."""


class GenerationError(MetaprovError):
    """A corpus-generation step could not be applied."""
