"""Database backends: the same embedded SQL engine, local or remote.

Rows are stored as plain question-mark strings; any encryption a database
might do internally is invisible to the client, so the encrypt and decrypt
channels stay at zero by construction. The remote variant is literally the
local engine running behind the data host's HTTP service.
"""

from __future__ import annotations

from pathlib import Path

from ..datahost import DataHostClient, DatabaseStore
from ..errors import NotFound, StorageFailure
from ..model import PatientRecord, RecordKind, serialize_row
from .base import Backend, Handles


class _RowsInDatabase(Backend):
    def _db_put(self, kind: RecordKind, patient_id: str, row: str) -> None:
        raise NotImplementedError

    def _db_get(self, kind: RecordKind, patient_id: str) -> str:
        raise NotImplementedError

    def _db_delete(self, kind: RecordKind, patient_id: str) -> None:
        raise NotImplementedError

    def _write_rows(self, record: PatientRecord, replacing: Handles | None) -> Handles:
        for kind in RecordKind:
            self._db_put(kind, record.patient_id, serialize_row(record, kind))
        return {kind.value: record.patient_id for kind in RecordKind}

    def _read_row(self, kind: RecordKind, patient_id: str, handles: Handles) -> str:
        try:
            return self._db_get(kind, handles[kind.value])
        except NotFound as exc:
            raise StorageFailure(
                f"indexed {kind.value} row for {patient_id!r} is missing"
            ) from exc

    def _remove_rows(self, patient_id: str, handles: Handles) -> None:
        for kind in RecordKind:
            try:
                self._db_delete(kind, handles[kind.value])
            except NotFound:
                pass


class LocalDatabase(_RowsInDatabase):
    def __init__(self, index, db_path: str | Path, metrics=None):
        super().__init__(index, metrics)
        self._store = DatabaseStore(db_path)

    def _db_put(self, kind: RecordKind, patient_id: str, row: str) -> None:
        self._store.put(kind.value, patient_id, row)

    def _db_get(self, kind: RecordKind, patient_id: str) -> str:
        return self._store.get(kind.value, patient_id)

    def _db_delete(self, kind: RecordKind, patient_id: str) -> None:
        self._store.delete(kind.value, patient_id)

    def close(self) -> None:
        self._store.close()
        super().close()


class RemoteDatabase(_RowsInDatabase):
    def __init__(self, index, client: DataHostClient, metrics=None):
        super().__init__(index, metrics)
        self._client = client

    def _db_put(self, kind: RecordKind, patient_id: str, row: str) -> None:
        with self.metrics.timed("network"):
            self._client.db_put(kind.value, patient_id, row)

    def _db_get(self, kind: RecordKind, patient_id: str) -> str:
        with self.metrics.timed("network"):
            return self._client.db_get(kind.value, patient_id)

    def _db_delete(self, kind: RecordKind, patient_id: str) -> None:
        with self.metrics.timed("network"):
            self._client.db_delete(kind.value, patient_id)

    def close(self) -> None:
        self._client.close()
        super().close()
