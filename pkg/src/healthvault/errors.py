"""Exception hierarchy shared by every layer, plus the HTTP wire mapping.

Service endpoints serialize these to a stable ``{"error": <code>, "message":
...}`` envelope; clients map the envelope back to the same exception type, so
callers see identical error kinds whether a store is local or remote.
"""

from __future__ import annotations


class HealthVaultError(Exception):
    """Base class for all errors raised by this package."""

    code = "internal_error"
    http_status = 500


# --- record model ----------------------------------------------------------

class DelimiterInField(HealthVaultError):
    """A record field contains the row delimiter and cannot be serialized."""

    code = "delimiter_in_field"
    http_status = 400


class MalformedRow(HealthVaultError):
    """A delimited row does not have exactly three fields."""

    code = "malformed_row"
    http_status = 400


class InvalidRecord(HealthVaultError):
    """A record violates a structural invariant (e.g. empty patient id)."""

    code = "invalid_record"
    http_status = 400


# --- key derivation --------------------------------------------------------

class InvalidCredentials(HealthVaultError):
    """Instance credentials are structurally unusable for key derivation."""

    code = "invalid_credentials"
    http_status = 400


# --- envelope crypto -------------------------------------------------------

class AuthenticationFailure(HealthVaultError):
    """Envelope decryption failed: wrong key or tampered bytes."""

    code = "authentication_failure"
    http_status = 401


class MalformedEnvelope(HealthVaultError):
    """Envelope bytes are truncated or carry an unknown version."""

    code = "malformed_envelope"
    http_status = 400


# --- registry --------------------------------------------------------------

class Unauthorized(HealthVaultError):
    """Admin token does not match the registry secret."""

    code = "unauthorized"
    http_status = 401


class NameTaken(HealthVaultError):
    """Requested instance name is already registered."""

    code = "name_taken"
    http_status = 409


class UnknownInstance(HealthVaultError):
    """No registry entry exists for the given instance id."""

    code = "unknown_instance"
    http_status = 404


# --- vault -----------------------------------------------------------------

class UnauthorizedOwner(HealthVaultError):
    """Owner credential does not match the binding for this instance id."""

    code = "unauthorized_owner"
    http_status = 401


class NotFound(HealthVaultError):
    """The referenced entity does not exist (or no longer exists)."""

    code = "not_found"
    http_status = 404


class StorageFailure(HealthVaultError):
    """A durable write or read failed on the storage host."""

    code = "storage_failure"
    http_status = 500


# --- storage backends / healthcare app --------------------------------------

class DuplicatePatient(HealthVaultError):
    """A record with this patient id already exists."""

    code = "duplicate_patient"
    http_status = 409


class BackendUnavailable(HealthVaultError):
    """The storage host cannot be reached (the attack condition)."""

    code = "backend_unavailable"
    http_status = 503


class RegistryUnreachable(HealthVaultError):
    """The central registry cannot be reached."""

    code = "registry_unreachable"
    http_status = 503


class VaultUnreachable(HealthVaultError):
    """The remote data store cannot be reached."""

    code = "vault_unreachable"
    http_status = 503


class RecoveryInProgress(HealthVaultError):
    """CRUD is refused while an instance rebuild is running."""

    code = "recovery_in_progress"
    http_status = 503


class RecoveryUnsupported(HealthVaultError):
    """The configured storage approach keeps no external reference ledger,
    so there is nothing to rebuild an index from."""

    code = "recovery_unsupported"
    http_status = 409


class RecoveryAuthFailure(AuthenticationFailure):
    """One or more fetched blobs failed to authenticate during recovery.

    Carries the precise list of offending refs so an operator can tell a
    wrong instance identity from vault corruption.
    """

    code = "recovery_authentication_failure"

    def __init__(self, message: str, refs: list[str]):
        super().__init__(message)
        self.refs = list(refs)


# --- harness ---------------------------------------------------------------

class TargetNotRunning(HealthVaultError):
    """Severance was requested for a host that has no live process."""

    code = "target_not_running"
    http_status = 409


_CODE_TO_EXC: dict[str, type[HealthVaultError]] = {
    cls.code: cls
    for cls in [
        HealthVaultError,
        DelimiterInField,
        MalformedRow,
        InvalidRecord,
        InvalidCredentials,
        AuthenticationFailure,
        MalformedEnvelope,
        Unauthorized,
        NameTaken,
        UnknownInstance,
        UnauthorizedOwner,
        NotFound,
        StorageFailure,
        DuplicatePatient,
        BackendUnavailable,
        RegistryUnreachable,
        VaultUnreachable,
        RecoveryInProgress,
        RecoveryUnsupported,
        TargetNotRunning,
    ]
}


def error_payload(exc: HealthVaultError) -> dict:
    payload = {"error": exc.code, "message": str(exc)}
    refs = getattr(exc, "refs", None)
    if refs is not None:
        payload["refs"] = list(refs)
    return payload


def exception_from_payload(status: int, payload: object) -> HealthVaultError:
    """Rebuild the typed exception a service serialized into an error body."""
    if isinstance(payload, dict):
        code = payload.get("error")
        message = payload.get("message", "")
        if code == RecoveryAuthFailure.code:
            return RecoveryAuthFailure(message, payload.get("refs", []))
        cls = _CODE_TO_EXC.get(code)
        if cls is not None:
            return cls(message)
    return HealthVaultError(f"HTTP {status}: {payload!r}")
