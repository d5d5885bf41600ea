"""Filesystem backends: plain and encrypted, local and remote.

Layout is the same everywhere: one directory per record kind, one file per
patient named by patient id. Plain variants store the question-mark row as
UTF-8 text with a trailing newline; encrypted variants store a sealed
envelope instead. Remote variants keep the identical layout on the data
host, reached over HTTP, with the round trip billed to the network channel.
"""

from __future__ import annotations

import os
from pathlib import Path

from ..datahost import DataHostClient
from ..envelope import seal, unseal
from ..errors import AuthenticationFailure, MalformedEnvelope, NotFound, StorageFailure
from ..model import PatientRecord, RecordKind, serialize_row
from .base import Backend, Handles


class _RowsAsFiles(Backend):
    """Template hooks shared by all four file variants: subclasses provide
    the byte codec (_encode_row/_decode_row) and the file port (_put/_get/
    _delete_file)."""

    def _encode_row(self, kind: RecordKind, record: PatientRecord) -> bytes:
        raise NotImplementedError

    def _decode_row(self, kind: RecordKind, patient_id: str, payload: bytes) -> str:
        raise NotImplementedError

    def _put_file(self, kind: RecordKind, name: str, payload: bytes) -> None:
        raise NotImplementedError

    def _get_file(self, kind: RecordKind, name: str) -> bytes:
        raise NotImplementedError

    def _delete_file(self, kind: RecordKind, name: str) -> None:
        raise NotImplementedError

    def _write_rows(self, record: PatientRecord, replacing: Handles | None) -> Handles:
        # Files are named by patient id, so updates overwrite in place and
        # the handles never change.
        for kind in RecordKind:
            self._put_file(kind, record.patient_id, self._encode_row(kind, record))
        return {kind.value: record.patient_id for kind in RecordKind}

    def _read_row(self, kind: RecordKind, patient_id: str, handles: Handles) -> str:
        try:
            payload = self._get_file(kind, handles[kind.value])
        except NotFound as exc:
            # The index says this patient exists; a vanished row file is
            # damage, not a normal miss.
            raise StorageFailure(
                f"indexed {kind.value} row for {patient_id!r} is missing"
            ) from exc
        return self._decode_row(kind, patient_id, payload)

    def _remove_rows(self, patient_id: str, handles: Handles) -> None:
        for kind in RecordKind:
            try:
                self._delete_file(kind, handles[kind.value])
            except NotFound:
                pass  # retirement is idempotent


class _PlainRows:
    def _encode_row(self, kind: RecordKind, record: PatientRecord) -> bytes:
        return (serialize_row(record, kind) + "\n").encode("utf-8")

    def _decode_row(self, kind: RecordKind, patient_id: str, payload: bytes) -> str:
        try:
            text = payload.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StorageFailure(f"row file for {patient_id!r} is not UTF-8") from exc
        return text.removesuffix("\n")


class _SealedRows:
    """Envelope codec. Time spent sealing and opening is what the encrypt
    and decrypt channels measure."""

    key: bytes

    def _encode_row(self, kind: RecordKind, record: PatientRecord) -> bytes:
        row = serialize_row(record, kind)
        with self.metrics.timed("encrypt"):  # type: ignore[attr-defined]
            return seal(self.key, kind, record.patient_id, row)

    def _decode_row(self, kind: RecordKind, patient_id: str, payload: bytes) -> str:
        try:
            with self.metrics.timed("decrypt"):  # type: ignore[attr-defined]
                got_kind, got_pid, row = unseal(self.key, payload)
        except MalformedEnvelope as exc:
            raise AuthenticationFailure(
                f"stored envelope for {patient_id!r} did not authenticate: {exc}"
            ) from exc
        if got_kind is not kind or got_pid != patient_id:
            raise AuthenticationFailure(
                f"envelope context mismatch: expected {kind.value}/{patient_id!r},"
                f" sealed as {got_kind.value}/{got_pid!r}"
            )
        return row


class _LocalFilePort:
    """Row files on the app host itself. Exactly what ransomware reaches."""

    def _init_port(self, root: str | Path) -> None:
        self._root = Path(root)
        for kind in RecordKind:
            (self._root / kind.value).mkdir(parents=True, exist_ok=True)

    def _path(self, kind: RecordKind, name: str) -> Path:
        return self._root / kind.value / name

    def _put_file(self, kind: RecordKind, name: str, payload: bytes) -> None:
        try:
            with open(self._path(kind, name), "wb") as fh:
                fh.write(payload)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"file write failed: {exc}") from exc

    def _get_file(self, kind: RecordKind, name: str) -> bytes:
        try:
            return self._path(kind, name).read_bytes()
        except FileNotFoundError as exc:
            raise NotFound(f"no {kind.value} file {name!r}") from exc
        except OSError as exc:
            raise StorageFailure(f"file read failed: {exc}") from exc

    def _delete_file(self, kind: RecordKind, name: str) -> None:
        try:
            self._path(kind, name).unlink()
        except FileNotFoundError as exc:
            raise NotFound(f"no {kind.value} file {name!r}") from exc
        except OSError as exc:
            raise StorageFailure(f"file delete failed: {exc}") from exc


class _RemoteFilePort:
    """Same layout on the data host; every touch is a network round trip."""

    def _init_port(self, client: DataHostClient) -> None:
        self._client = client

    def _put_file(self, kind: RecordKind, name: str, payload: bytes) -> None:
        with self.metrics.timed("network"):  # type: ignore[attr-defined]
            self._client.file_put(kind.value, name, payload)

    def _get_file(self, kind: RecordKind, name: str) -> bytes:
        with self.metrics.timed("network"):  # type: ignore[attr-defined]
            return self._client.file_get(kind.value, name)

    def _delete_file(self, kind: RecordKind, name: str) -> None:
        with self.metrics.timed("network"):  # type: ignore[attr-defined]
            self._client.file_delete(kind.value, name)


class LocalFilePlain(_PlainRows, _LocalFilePort, _RowsAsFiles):
    def __init__(self, index, root, metrics=None):
        super().__init__(index, metrics)
        self._init_port(root)


class LocalFileEncrypted(_SealedRows, _LocalFilePort, _RowsAsFiles):
    def __init__(self, index, root, key: bytes, metrics=None):
        super().__init__(index, metrics)
        self._init_port(root)
        self.key = key


class RemoteFilePlain(_PlainRows, _RemoteFilePort, _RowsAsFiles):
    def __init__(self, index, client: DataHostClient, metrics=None):
        super().__init__(index, metrics)
        self._init_port(client)

    def close(self) -> None:
        self._client.close()
        super().close()


class RemoteFileEncrypted(_SealedRows, _RemoteFilePort, _RowsAsFiles):
    def __init__(self, index, client: DataHostClient, key: bytes, metrics=None):
        super().__init__(index, metrics)
        self._init_port(client)
        self.key = key

    def close(self) -> None:
        self._client.close()
        super().close()
