"""Shared machinery for the seven storage backends.

Every backend funnels through the same template: a local patient index maps
patient_id to per-kind storage handles, and the index is the sole authority
on which patients exist. That mirrors the architecture under test; records
whose references are lost are lost, no matter what bytes survive on some
host. The subclasses only decide where rows go and whether they are sealed
on the way.
"""

from __future__ import annotations

import abc
import json
import os
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..errors import DuplicatePatient, InvalidRecord, NotFound, StorageFailure
from ..journal import Journal
from ..model import PatientRecord, RecordKind, record_from_rows

# pid -> {"pii": handle, "financial": handle}
Handles = dict[str, str]

_INDEX_AAD = b"healthvault.index.v1"
_INDEX_NONCE_BYTES = 12


class SealedLineCodec:
    """Encrypts index journal lines in place.

    The index is the one file a vault-backed instance persists, and it maps
    patient ids to references. Sealing each line keeps the app host free of
    plaintext identifiers too, so a disk image of the app host exposes
    nothing a raw-byte scan could match against record fields.
    """

    def __init__(self, key: bytes) -> None:
        self._aead = AESGCM(key)

    def encode(self, entry: dict) -> dict:
        raw = json.dumps(entry, separators=(",", ":")).encode()
        nonce = os.urandom(_INDEX_NONCE_BYTES)
        return {"x": (nonce + self._aead.encrypt(nonce, raw, _INDEX_AAD)).hex()}

    def decode(self, entry: dict) -> dict:
        if "x" not in entry:
            raise StorageFailure("sealed index contains an unsealed line")
        try:
            blob = bytes.fromhex(entry["x"])
            nonce, ct = blob[:_INDEX_NONCE_BYTES], blob[_INDEX_NONCE_BYTES:]
            return json.loads(self._aead.decrypt(nonce, ct, _INDEX_AAD))
        except (ValueError, InvalidTag) as exc:
            raise StorageFailure(f"sealed index line unreadable: {exc}") from exc


@dataclass(frozen=True)
class MetricsSnapshot:
    encrypt_ns: int = 0
    decrypt_ns: int = 0
    network_ns: int = 0
    encrypt_ops: int = 0
    decrypt_ops: int = 0
    network_ops: int = 0
    op_counts: dict[str, int] = field(default_factory=dict)

    def minus(self, earlier: "MetricsSnapshot") -> "MetricsSnapshot":
        ops = dict(self.op_counts)
        for name, count in earlier.op_counts.items():
            ops[name] = ops.get(name, 0) - count
        return MetricsSnapshot(
            encrypt_ns=self.encrypt_ns - earlier.encrypt_ns,
            decrypt_ns=self.decrypt_ns - earlier.decrypt_ns,
            network_ns=self.network_ns - earlier.network_ns,
            encrypt_ops=self.encrypt_ops - earlier.encrypt_ops,
            decrypt_ops=self.decrypt_ops - earlier.decrypt_ops,
            network_ops=self.network_ops - earlier.network_ops,
            op_counts={k: v for k, v in ops.items() if v},
        )


class BackendMetrics:
    """Per-channel wall-clock totals. Network time is the client-observed
    round trip; Local* backends simply never touch that channel."""

    _CHANNELS = ("encrypt", "decrypt", "network")

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._totals_ns = {name: 0 for name in self._CHANNELS}
        self._channel_ops = {name: 0 for name in self._CHANNELS}
        self._op_counts: dict[str, int] = {}

    @contextmanager
    def timed(self, channel: str):
        if channel not in self._totals_ns:
            raise ValueError(f"unknown metrics channel {channel!r}")
        started = time.perf_counter_ns()
        try:
            yield
        finally:
            elapsed = time.perf_counter_ns() - started
            with self._lock:
                self._totals_ns[channel] += elapsed
                self._channel_ops[channel] += 1

    def record_op(self, name: str) -> None:
        with self._lock:
            self._op_counts[name] = self._op_counts.get(name, 0) + 1

    def snapshot(self) -> MetricsSnapshot:
        with self._lock:
            return MetricsSnapshot(
                encrypt_ns=self._totals_ns["encrypt"],
                decrypt_ns=self._totals_ns["decrypt"],
                network_ns=self._totals_ns["network"],
                encrypt_ops=self._channel_ops["encrypt"],
                decrypt_ops=self._channel_ops["decrypt"],
                network_ops=self._channel_ops["network"],
                op_counts=dict(self._op_counts),
            )


class PatientIndex:
    """The app-local map of patient_id to storage handles.

    Journal-backed so a clean restart keeps it, but deliberately expendable:
    it lives inside the app boundary and an attack on the app host destroys
    it. Holds only ids and handles, never record fields.
    """

    def __init__(self, journal_path, codec: SealedLineCodec | None = None) -> None:
        self._journal = Journal(journal_path)
        self._lock = threading.Lock()
        self._codec = codec
        self._entries: dict[str, Handles] = {}
        for entry in self._journal.replay():
            if codec is not None:
                entry = codec.decode(entry)
            if entry["op"] == "set":
                self._entries[entry["pid"]] = entry["handles"]
            elif entry["op"] == "del":
                self._entries.pop(entry["pid"], None)

    def _append(self, entry: dict) -> None:
        if self._codec is not None:
            entry = self._codec.encode(entry)
        self._journal.append(entry)

    def get(self, patient_id: str) -> Handles | None:
        with self._lock:
            handles = self._entries.get(patient_id)
            return dict(handles) if handles is not None else None

    def has(self, patient_id: str) -> bool:
        with self._lock:
            return patient_id in self._entries

    def set(self, patient_id: str, handles: Handles) -> None:
        self._append({"op": "set", "pid": patient_id, "handles": handles})
        with self._lock:
            self._entries[patient_id] = dict(handles)

    def delete(self, patient_id: str) -> None:
        self._append({"op": "del", "pid": patient_id})
        with self._lock:
            self._entries.pop(patient_id, None)

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def clear(self) -> None:
        """Drop every entry and the journal behind it (recovery reset).

        Callers must have quiesced writers first; the recovery gate does.
        """
        with self._lock:
            self._entries = {}
        self._journal.close()
        self._journal.path.unlink(missing_ok=True)

    def rekey(self, codec: SealedLineCodec | None) -> None:
        """Swap the line codec. Only sane right after clear(), when the
        journal is empty; recovery uses it to reseal under the adopted key."""
        with self._lock:
            self._codec = codec

    def close(self) -> None:
        self._journal.close()


class PidLocks:
    """Striped locks: per-patient serialization without a lock per patient."""

    def __init__(self, stripes: int = 64) -> None:
        self._locks = [threading.Lock() for _ in range(stripes)]

    def for_pid(self, patient_id: str) -> threading.Lock:
        return self._locks[hash(patient_id) % len(self._locks)]


class Backend(abc.ABC):
    """CRUD template over (index, row storage). Subclasses store rows."""

    def __init__(self, index: PatientIndex, metrics: BackendMetrics | None = None) -> None:
        self.index = index
        self.metrics = metrics if metrics is not None else BackendMetrics()
        self._pid_locks = PidLocks()

    # -- storage hooks ---------------------------------------------------

    @abc.abstractmethod
    def _write_rows(self, record: PatientRecord, replacing: Handles | None) -> Handles:
        """Persist both rows, returning fresh handles. When replacing, the
        old handles are retired as part of the write (in-place or swap)."""

    @abc.abstractmethod
    def _read_row(self, kind: RecordKind, patient_id: str, handles: Handles) -> str:
        """Fetch and decode one row by its handle."""

    @abc.abstractmethod
    def _remove_rows(self, patient_id: str, handles: Handles) -> None:
        """Retire both rows from storage."""

    # -- CRUD --------------------------------------------------------------

    def create(self, record: PatientRecord) -> None:
        record.validate()
        pid = record.patient_id
        with self._pid_locks.for_pid(pid):
            if self.index.has(pid):
                raise DuplicatePatient(f"patient {pid!r} already exists")
            handles = self._write_rows(record, replacing=None)
            # Index write is last: a failed storage write leaves no entry.
            self.index.set(pid, handles)
        self.metrics.record_op("create")

    def read(self, patient_id: str) -> PatientRecord:
        with self._pid_locks.for_pid(patient_id):
            handles = self.index.get(patient_id)
            if handles is None:
                raise NotFound(f"no patient {patient_id!r}")
            pii_row = self._read_row(RecordKind.PII, patient_id, handles)
            fin_row = self._read_row(RecordKind.FINANCIAL, patient_id, handles)
        record = record_from_rows(patient_id, pii_row, fin_row)
        self.metrics.record_op("read")
        return record

    def update(self, patient_id: str, record: PatientRecord) -> None:
        record.validate()
        if record.patient_id != patient_id:
            raise InvalidRecord(
                f"record is for {record.patient_id!r}, not {patient_id!r}"
            )
        with self._pid_locks.for_pid(patient_id):
            handles = self.index.get(patient_id)
            if handles is None:
                raise NotFound(f"no patient {patient_id!r}")
            new_handles = self._write_rows(record, replacing=handles)
            self.index.set(patient_id, new_handles)
        self.metrics.record_op("update")

    def delete(self, patient_id: str) -> None:
        with self._pid_locks.for_pid(patient_id):
            handles = self.index.get(patient_id)
            if handles is None:
                raise NotFound(f"no patient {patient_id!r}")
            self._remove_rows(patient_id, handles)
            self.index.delete(patient_id)
        self.metrics.record_op("delete")

    def list_ids(self) -> list[str]:
        ids = self.index.ids()
        self.metrics.record_op("list")
        return ids

    def close(self) -> None:
        """Release backend-owned resources (clients, db handles). The index
        is shared state owned by whoever created it; closing it is theirs."""
