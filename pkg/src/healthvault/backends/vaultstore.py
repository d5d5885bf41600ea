"""The proposed backend: sealed envelopes in the external vault.

Nothing sensitive exists inside the app boundary. Each row is sealed
client-side and shipped to the vault, which hands back a UUID reference;
the local index keeps only patient ids and references. Updates cannot be
done in place (the vault has no update), so they create fresh blobs and
retire the old references, swapping the index entry once both new blobs
are stored.

This module also owns index reconstruction: given credentials-derived key
material and a vault, it pulls the owner's reference list, opens every
blob, and rebuilds the patient index from the context sealed inside the
envelopes. That procedure is the entire recovery story.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..envelope import seal, unseal
from ..errors import (
    AuthenticationFailure,
    MalformedEnvelope,
    NotFound,
    RecoveryAuthFailure,
    StorageFailure,
)
from ..model import PatientRecord, RecordKind, serialize_row
from ..vault import VaultClient
from .base import Backend, Handles, PatientIndex


class ProposedVault(Backend):
    def __init__(self, index: PatientIndex, client: VaultClient, key: bytes, metrics=None):
        super().__init__(index, metrics)
        self._client = client
        self.key = key

    def _seal_row(self, kind: RecordKind, record: PatientRecord) -> bytes:
        row = serialize_row(record, kind)
        with self.metrics.timed("encrypt"):
            return seal(self.key, kind, record.patient_id, row)

    def _write_rows(self, record: PatientRecord, replacing: Handles | None) -> Handles:
        blobs = {kind: self._seal_row(kind, record) for kind in RecordKind}
        handles: Handles = {}
        for kind, blob in blobs.items():
            with self.metrics.timed("network"):
                handles[kind.value] = self._client.create(blob)
        if replacing is not None:
            # New blobs are live before old references are retired, so a
            # failure part-way never leaves the patient unreadable.
            self._retire(replacing)
        return handles

    def _read_row(self, kind: RecordKind, patient_id: str, handles: Handles) -> str:
        ref = handles[kind.value]
        try:
            with self.metrics.timed("network"):
                blob = self._client.get(ref)
        except NotFound as exc:
            raise StorageFailure(
                f"vault no longer holds ref {ref!r} for {patient_id!r}"
            ) from exc
        try:
            with self.metrics.timed("decrypt"):
                got_kind, got_pid, row = unseal(self.key, blob)
        except MalformedEnvelope as exc:
            raise AuthenticationFailure(
                f"vault blob {ref!r} did not authenticate: {exc}"
            ) from exc
        if got_kind is not kind or got_pid != patient_id:
            raise AuthenticationFailure(
                f"vault blob {ref!r} context mismatch: expected"
                f" {kind.value}/{patient_id!r}, sealed as {got_kind.value}/{got_pid!r}"
            )
        return row

    def _remove_rows(self, patient_id: str, handles: Handles) -> None:
        self._retire(handles)

    def _retire(self, handles: Handles) -> None:
        for kind in RecordKind:
            try:
                with self.metrics.timed("network"):
                    self._client.delete(handles[kind.value])
            except NotFound:
                pass  # stale reference; the vault already forgot it

    def close(self) -> None:
        self._client.close()
        super().close()


@dataclass
class RebuildReport:
    blobs_fetched: int = 0
    patients_restored: int = 0
    failed_refs: list[str] = field(default_factory=list)
    incomplete_patients: list[str] = field(default_factory=list)


def rebuild_index_from_vault(
    client: VaultClient,
    key: bytes,
    index: PatientIndex,
    *,
    workers: int = 8,
) -> RebuildReport:
    """Reconstruct a patient index from nothing but the vault and the key.

    Fetches the owner's reference ledger, opens every blob, and pairs the
    (kind, patient_id) context found inside the envelopes. Every blob that
    fails authentication is collected before the whole rebuild is aborted,
    so the caller can report the precise damage.

    Reference-ledger order decides conflicts: if several live blobs claim
    the same (patient, kind), the most recently stored one wins, which is
    how an interrupted update resolves to its newest complete write.
    """
    report = RebuildReport()
    refs = client.list_refs()

    def fetch(ref: str):
        blob = client.get(ref)
        return unseal(key, blob)

    opened: dict[str, tuple] = {}
    if refs:
        with ThreadPoolExecutor(max_workers=min(workers, len(refs))) as pool:
            for ref, outcome in zip(refs, pool.map(lambda r: _try(fetch, r), refs)):
                if isinstance(outcome, Exception):
                    report.failed_refs.append(ref)
                else:
                    opened[ref] = outcome
    report.blobs_fetched = len(opened)
    if report.failed_refs:
        raise RecoveryAuthFailure(
            f"{len(report.failed_refs)} vault blob(s) failed to authenticate"
            " during recovery",
            report.failed_refs,
        )

    by_patient: dict[str, dict[str, str]] = {}
    for ref in refs:  # ledger order, so later writes overwrite earlier ones
        kind, patient_id, _row = opened[ref]
        by_patient.setdefault(patient_id, {})[kind.value] = ref

    for patient_id, handles in by_patient.items():
        if len(handles) == len(RecordKind):
            index.set(patient_id, handles)
            report.patients_restored += 1
        else:
            report.incomplete_patients.append(patient_id)
    return report


def _try(fn, arg):
    try:
        return fn(arg)
    except (MalformedEnvelope, NotFound) as exc:
        return exc
