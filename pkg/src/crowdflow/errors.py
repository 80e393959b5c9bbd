"""Domain error taxonomy.

Every error the engine can raise carries a machine-readable ``code`` that is
part of the public contract: the gateway returns it verbatim in the JSON error
body and the CLI prints it. HTTP status mapping lives on the class so the
gateway stays a thin adapter.
"""

from __future__ import annotations


class CrowdflowError(Exception):
    """Base for all domain errors."""

    code = "ERROR"
    http_status = 400

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code

    def to_doc(self) -> dict:
        return {"error": self.code, "message": self.message}


class DefinitionSyntaxError(CrowdflowError):
    """Definition document is not well-formed (bad JSON, wrong shapes)."""

    code = "SYNTAX"


class DefinitionValidationError(CrowdflowError):
    """Definition violates one or more structural rules."""

    code = "VALIDATION"

    def __init__(self, violations):
        self.violations = list(violations)
        codes = ", ".join(v.code for v in self.violations)
        super().__init__(f"invalid definition: {codes}")

    def to_doc(self) -> dict:
        doc = super().to_doc()
        doc["violations"] = [v.to_doc() for v in self.violations]
        return doc


class DuplicateDefinition(CrowdflowError):
    code = "DUPLICATE_DEFINITION"
    http_status = 409


class UnknownDefinition(CrowdflowError):
    code = "UNKNOWN_DEFINITION"
    http_status = 404


class UnknownInstance(CrowdflowError):
    code = "UNKNOWN_INSTANCE"
    http_status = 404


class UnknownActivity(CrowdflowError):
    code = "UNKNOWN_ACTIVITY"
    http_status = 404


class UnknownUser(CrowdflowError):
    code = "UNKNOWN_USER"
    http_status = 404


class UnknownItem(CrowdflowError):
    code = "UNKNOWN_ITEM"
    http_status = 404


class UnknownExecution(CrowdflowError):
    code = "UNKNOWN_EXECUTION"
    http_status = 404


class StartConditionUnmet(CrowdflowError):
    code = "START_CONDITION_UNMET"
    http_status = 409


class IllegalState(CrowdflowError):
    """Command not legal in the target's current state."""

    code = "ILLEGAL_STATE"
    http_status = 409


class IllegalExecState(CrowdflowError):
    code = "ILLEGAL_EXEC_STATE"
    http_status = 409


class RoleDenied(CrowdflowError):
    code = "ROLE_DENIED"
    http_status = 403


class AuthorizationDenied(CrowdflowError):
    code = "AUTHORIZATION_DENIED"
    http_status = 403


class DuplicateSession(CrowdflowError):
    code = "DUPLICATE_SESSION"
    http_status = 409


class SessionClosedError(CrowdflowError):
    """Claim or submission arrived at/after the deadline or after close."""

    code = "SESSION_CLOSED"
    http_status = 409


class SessionNotClosed(CrowdflowError):
    code = "SESSION_NOT_CLOSED"
    http_status = 409


class CapacityReached(CrowdflowError):
    code = "CAPACITY_REACHED"
    http_status = 409


class DuplicateActiveClaim(CrowdflowError):
    code = "DUPLICATE_ACTIVE_CLAIM"
    http_status = 409


class InvalidSelection(CrowdflowError):
    code = "INVALID_SELECTION"


class InvalidRegistration(CrowdflowError):
    code = "INVALID_REGISTRATION"


class InvalidRequest(CrowdflowError):
    code = "INVALID_REQUEST"


class UnknownEventKind(CrowdflowError):
    code = "UNKNOWN_EVENT_KIND"


class StorageFailure(CrowdflowError):
    code = "STORAGE_FAILURE"
    http_status = 500


class CorruptLog(CrowdflowError):
    code = "CORRUPT_LOG"
    http_status = 500


class CorruptSnapshot(CrowdflowError):
    code = "CORRUPT_SNAPSHOT"
    http_status = 500


class EngineUnavailable(CrowdflowError):
    code = "ENGINE_UNAVAILABLE"
    http_status = 503
