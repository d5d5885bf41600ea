"""The seven storage approaches under comparison, behind one interface."""

from __future__ import annotations

import enum
from pathlib import Path

from ..datahost import DataHostClient
from ..kdf import InstanceCredentials
from ..vault import VaultClient
from .base import (
    Backend,
    BackendMetrics,
    MetricsSnapshot,
    PatientIndex,
    SealedLineCodec,
)
from .database import LocalDatabase, RemoteDatabase
from .files import (
    LocalFileEncrypted,
    LocalFilePlain,
    RemoteFileEncrypted,
    RemoteFilePlain,
)
from .vaultstore import ProposedVault, RebuildReport, rebuild_index_from_vault

__all__ = [
    "Backend",
    "BackendKind",
    "BackendMetrics",
    "MetricsSnapshot",
    "PatientIndex",
    "ProposedVault",
    "SealedLineCodec",
    "RebuildReport",
    "make_backend",
    "open_patient_index",
    "rebuild_index_from_vault",
]


class BackendKind(str, enum.Enum):
    LOCAL_FILE_PLAIN = "local_file_plain"
    LOCAL_FILE_ENCRYPTED = "local_file_encrypted"
    REMOTE_FILE_PLAIN = "remote_file_plain"
    REMOTE_FILE_ENCRYPTED = "remote_file_encrypted"
    LOCAL_DATABASE = "local_database"
    REMOTE_DATABASE = "remote_database"
    PROPOSED_VAULT = "proposed_vault"

    @property
    def is_remote(self) -> bool:
        """True when record bytes leave the app host for another process."""
        return self in (
            BackendKind.REMOTE_FILE_PLAIN,
            BackendKind.REMOTE_FILE_ENCRYPTED,
            BackendKind.REMOTE_DATABASE,
            BackendKind.PROPOSED_VAULT,
        )

    @property
    def is_encrypted(self) -> bool:
        """True when the client seals rows before storing them."""
        return self in (
            BackendKind.LOCAL_FILE_ENCRYPTED,
            BackendKind.REMOTE_FILE_ENCRYPTED,
            BackendKind.PROPOSED_VAULT,
        )

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]


_DISPLAY_NAMES = {
    BackendKind.LOCAL_FILE_PLAIN: "Unencrypted local filesystem.",
    BackendKind.LOCAL_FILE_ENCRYPTED: "Encrypted local filesystem.",
    BackendKind.REMOTE_FILE_PLAIN: "Unencrypted remote filesystem.",
    BackendKind.REMOTE_FILE_ENCRYPTED: "Encrypted remote filesystem.",
    BackendKind.LOCAL_DATABASE: "Local database.",
    BackendKind.REMOTE_DATABASE: "Remote database.",
    BackendKind.PROPOSED_VAULT: "Storage approach proposed by this work.",
}


def open_patient_index(data_dir: str | Path, key: bytes | None = None) -> PatientIndex:
    """Open the app-local index; with a key, its journal lines are sealed
    so the file never holds patient ids in the clear."""
    codec = SealedLineCodec(key) if key is not None else None
    return PatientIndex(Path(data_dir) / "index.jsonl", codec)


def make_backend(
    kind: BackendKind | str,
    *,
    data_dir: str | Path,
    key: bytes | None = None,
    credentials: InstanceCredentials | None = None,
    datahost_url: str | None = None,
    vault_url: str | None = None,
    ca_file: str | Path | None = None,
    metrics: BackendMetrics | None = None,
    index: PatientIndex | None = None,
) -> Backend:
    """Wire up one storage approach rooted at the app's local state dir.

    data_dir is the app boundary: the patient index always lives there, and
    the Local* variants keep their row storage there too, which is exactly
    why they die with the host.
    """
    kind = BackendKind(kind)
    data_dir = Path(data_dir)
    if kind.is_encrypted and key is None:
        raise ValueError(f"{kind.value} requires key material")
    if index is None:
        # The vault approach leaves nothing legible on the app host, so its
        # index is sealed too; the others store rows in the clear anyway.
        index_key = key if kind is BackendKind.PROPOSED_VAULT else None
        index = open_patient_index(data_dir, key=index_key)

    if kind is BackendKind.LOCAL_FILE_PLAIN:
        return LocalFilePlain(index, data_dir / "rows", metrics)
    if kind is BackendKind.LOCAL_FILE_ENCRYPTED:
        return LocalFileEncrypted(index, data_dir / "rows", key, metrics)
    if kind is BackendKind.LOCAL_DATABASE:
        return LocalDatabase(index, data_dir / "db.sqlite3", metrics)

    if kind is BackendKind.PROPOSED_VAULT:
        if vault_url is None or credentials is None:
            raise ValueError("proposed_vault requires vault_url and credentials")
        client = VaultClient(vault_url, credentials, ca_file=ca_file)
        return ProposedVault(index, client, key, metrics)

    if datahost_url is None:
        raise ValueError(f"{kind.value} requires datahost_url")
    host = DataHostClient(datahost_url, ca_file=ca_file)
    if kind is BackendKind.REMOTE_FILE_PLAIN:
        return RemoteFilePlain(index, host, metrics)
    if kind is BackendKind.REMOTE_FILE_ENCRYPTED:
        return RemoteFileEncrypted(index, host, key, metrics)
    return RemoteDatabase(index, host, metrics)
