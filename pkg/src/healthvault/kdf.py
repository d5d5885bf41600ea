"""Deriving the per-instance encryption key from registry credentials.

The key never exists anywhere except in the memory of a running app
instance. It is recomputed from (instance_id, license_key) via
PBKDF2-HMAC-SHA256 with a fixed version-tagged salt, so a rebuilt instance
that re-registers under its old name gets byte-identical key material
without any key ever being stored or transmitted.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import InvalidCredentials

# Bumping the construction means bumping this tag, never silently changing
# output for the same inputs.
KDF_SALT = b"healthvault.kdf.v1"
DEFAULT_ITERATIONS = 100_000
KEY_BYTES = 32

MIN_LICENSE_KEY_CHARS = 32


@dataclass(frozen=True)
class InstanceCredentials:
    """What the registry hands an app instance at registration."""

    instance_id: str
    license_key: str

    def validate(self) -> None:
        if not self.instance_id:
            raise InvalidCredentials("instance_id must be non-empty")
        if not self.license_key:
            raise InvalidCredentials("license_key must be non-empty")
        if len(self.license_key) < MIN_LICENSE_KEY_CHARS:
            raise InvalidCredentials(
                f"license_key shorter than {MIN_LICENSE_KEY_CHARS} characters"
            )


@dataclass(frozen=True)
class DerivedKey:
    key: bytes
    iterations: int

    def __repr__(self) -> str:  # keep key bytes out of logs and tracebacks
        return f"DerivedKey(key=<{len(self.key)} bytes redacted>, iterations={self.iterations})"


def derive_key(
    credentials: InstanceCredentials,
    iterations: int = DEFAULT_ITERATIONS,
) -> DerivedKey:
    """Stretch instance_id concatenated with license_key into a 256-bit key."""
    credentials.validate()
    if iterations < 1:
        raise ValueError("iterations must be positive")
    password = (credentials.instance_id + credentials.license_key).encode("utf-8")
    key = hashlib.pbkdf2_hmac("sha256", password, KDF_SALT, iterations, dklen=KEY_BYTES)
    return DerivedKey(key=key, iterations=iterations)


# Domain-separated from the encryption key on purpose: the vault sees this
# token on every request, so it must not be usable to decrypt anything.
VAULT_TOKEN_TAG = "healthvault.vault-token.v1"


def derive_vault_token(credentials: InstanceCredentials) -> str:
    """Bearer token an instance presents to the vault.

    Deterministic in the credentials, so a rebuilt instance holding the same
    (instance_id, license_key) pair authenticates as the original owner. The
    registry can recompute it for verification; the license key itself never
    crosses to the vault.
    """
    credentials.validate()
    material = f"{VAULT_TOKEN_TAG}:{credentials.instance_id}:{credentials.license_key}"
    return hashlib.sha256(material.encode("utf-8")).hexdigest()
