"""The healthcare application: patient CRUD plus post-ransom recovery.

On boot the app registers with the central registry (or reregisters when
told to resume an existing identity), derives its encryption key in memory,
and wires up the configured storage approach. Credentials are never written
to disk; a rebuilt host gets them back from the registry, which is the
point of the whole design.

POST /admin/recover is the ransom-recovery procedure: adopt the given
instance identity, recompute the key, pull the reference ledger from the
vault, open every blob, and rebuild the patient index from the context
sealed inside. CRUD is refused while that runs.

Run standalone with ``python -m healthvault.healthapp``.
"""

from __future__ import annotations

import argparse
import os
import threading
import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .backends import (
    BackendKind,
    ProposedVault,
    SealedLineCodec,
    make_backend,
    open_patient_index,
    rebuild_index_from_vault,
)
from .errors import (
    BackendUnavailable,
    HealthVaultError,
    RecoveryInProgress,
    RecoveryUnsupported,
    StorageFailure,
    error_payload,
)
from .httpkit import JsonClient, expect
from .kdf import derive_key
from .model import PatientRecord
from .registry import RegistryClient
from .vault import VaultClient


class HealthApp:
    """Application state: identity, key, backend, and the recovery gate."""

    def __init__(
        self,
        *,
        storage_kind: BackendKind,
        data_dir: Path,
        registry_url: str,
        vault_url: str | None,
        datahost_url: str | None,
        kdf_iterations: int,
        admin_token: str,
        instance_id: str | None = None,
        ca_file: str | Path | None = None,
    ) -> None:
        self.storage_kind = BackendKind(storage_kind)
        self.data_dir = Path(data_dir)
        self.kdf_iterations = kdf_iterations
        self._vault_url = vault_url
        self._datahost_url = datahost_url
        self._ca_file = ca_file
        self._registry = RegistryClient(registry_url, ca_file=ca_file)

        # Boot-time registration; the admin token is used once and dropped.
        if instance_id is None:
            self.creds = self._registry.register(admin_token)
        else:
            self.creds = self._registry.reregister(instance_id, admin_token)
        self.key = derive_key(self.creds, kdf_iterations)

        self.index = self._open_index()
        self.backend = self._build_backend()

        self._recover_mutex = threading.Lock()
        self._recovering = threading.Event()

    def _index_key(self) -> bytes | None:
        if self.storage_kind is BackendKind.PROPOSED_VAULT:
            return self.key.key
        return None

    def _open_index(self):
        try:
            return open_patient_index(self.data_dir, key=self._index_key())
        except StorageFailure:
            if self.storage_kind is not BackendKind.PROPOSED_VAULT:
                raise
            # A sealed index this identity cannot read is a leftover from
            # some other instance. The vault ledger is the durable truth
            # here, so discard it rather than refuse to boot.
            (self.data_dir / "index.jsonl").unlink(missing_ok=True)
            return open_patient_index(self.data_dir, key=self._index_key())

    def _build_backend(self):
        return make_backend(
            self.storage_kind,
            data_dir=self.data_dir,
            key=self.key.key,
            credentials=self.creds,
            datahost_url=self._datahost_url,
            vault_url=self._vault_url,
            ca_file=self._ca_file,
            index=self.index,
        )

    # -- CRUD (refused mid-recovery) -----------------------------------------

    def _gate(self) -> None:
        if self._recovering.is_set():
            raise RecoveryInProgress("instance rebuild in progress, retry shortly")

    def create(self, record: PatientRecord) -> None:
        self._gate()
        self.backend.create(record)

    def read(self, patient_id: str) -> PatientRecord:
        self._gate()
        return self.backend.read(patient_id)

    def update(self, patient_id: str, record: PatientRecord) -> None:
        self._gate()
        self.backend.update(patient_id, record)

    def delete(self, patient_id: str) -> None:
        self._gate()
        self.backend.delete(patient_id)

    def list_ids(self) -> list[str]:
        self._gate()
        return self.backend.list_ids()

    # -- recovery --------------------------------------------------------

    def recover(self, instance_id: str, admin_token: str) -> dict:
        """Adopt an identity and rebuild the index from the vault ledger."""
        if self.storage_kind is not BackendKind.PROPOSED_VAULT:
            raise RecoveryUnsupported(
                f"storage kind {self.storage_kind.value} keeps no reference"
                " ledger; there is nothing to rebuild from"
            )
        if not self._recover_mutex.acquire(blocking=False):
            raise RecoveryInProgress("a rebuild is already running")
        try:
            self._recovering.set()
            started = time.perf_counter()
            creds = self._registry.reregister(instance_id, admin_token)
            key = derive_key(creds, self.kdf_iterations)
            client = VaultClient(self._vault_url, creds, ca_file=self._ca_file)
            # Whatever index survived is untrusted; the ledger is truth.
            # Reseal under the adopted identity's key so a later restart
            # of this instance can still read its own index.
            self.index.clear()
            self.index.rekey(SealedLineCodec(key.key))
            report = rebuild_index_from_vault(client, key.key, self.index)
            old = self.backend
            self.creds, self.key = creds, key
            self.backend = ProposedVault(
                self.index, client, key.key, metrics=old.metrics
            )
            old.close()
            elapsed = time.perf_counter() - started
            return {
                "instance_id": creds.instance_id,
                "records_restored": report.blobs_fetched,
                "patients_restored": report.patients_restored,
                "incomplete_patients": report.incomplete_patients,
                "elapsed_s": round(elapsed, 3),
            }
        finally:
            self._recovering.clear()
            self._recover_mutex.release()

    def close(self) -> None:
        self.backend.close()
        self.index.close()
        self._registry.close()


class RecoverBody(BaseModel):
    instance_id: str
    admin_token: str


def create_app(state: HealthApp) -> FastAPI:
    app = FastAPI(title="healthvault app")

    @app.exception_handler(HealthVaultError)
    async def _domain_error(request: Request, exc: HealthVaultError):
        return JSONResponse(status_code=exc.http_status, content=error_payload(exc))

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "service": "healthapp",
            "instance_id": state.creds.instance_id,
            "storage_kind": state.storage_kind.value,
        }

    @app.post("/patients", status_code=201)
    def create(body: dict):
        record = PatientRecord.from_dict(body)
        state.create(record)
        return {"patient_id": record.patient_id}

    @app.get("/patients")
    def list_patients():
        return {"patient_ids": state.list_ids()}

    @app.get("/patients/{patient_id}")
    def read(patient_id: str):
        return state.read(patient_id).to_dict()

    @app.put("/patients/{patient_id}")
    def update(patient_id: str, body: dict):
        record = PatientRecord.from_dict(body)
        state.update(patient_id, record)
        return {"patient_id": patient_id}

    @app.delete("/patients/{patient_id}")
    def delete(patient_id: str):
        state.delete(patient_id)
        return Response(status_code=204)

    @app.post("/admin/recover")
    def recover(body: RecoverBody):
        return state.recover(body.instance_id, body.admin_token)

    return app


# A rebuild fetches every ledgered blob before answering; give it the full
# recovery budget plus slack rather than the interactive default.
RECOVER_TIMEOUT_S = 300.0


class HealthAppClient:
    """HTTP client for the app; app loss surfaces as BackendUnavailable."""

    def __init__(self, base_url: str, *, ca_file: str | Path | None = None) -> None:
        self._base_url = base_url
        self._ca_file = ca_file
        self._client = JsonClient(base_url, ca_file=ca_file)

    def health(self) -> dict:
        return expect(self._client, "GET", "/health", unreachable=BackendUnavailable)

    def create(self, record: PatientRecord) -> None:
        expect(
            self._client,
            "POST",
            "/patients",
            body=record.to_dict(),
            unreachable=BackendUnavailable,
        )

    def read(self, patient_id: str) -> PatientRecord:
        payload = expect(
            self._client,
            "GET",
            f"/patients/{patient_id}",
            unreachable=BackendUnavailable,
        )
        return PatientRecord.from_dict(payload)

    def update(self, patient_id: str, record: PatientRecord) -> None:
        expect(
            self._client,
            "PUT",
            f"/patients/{patient_id}",
            body=record.to_dict(),
            unreachable=BackendUnavailable,
        )

    def delete(self, patient_id: str) -> None:
        expect(
            self._client,
            "DELETE",
            f"/patients/{patient_id}",
            unreachable=BackendUnavailable,
        )

    def list_ids(self) -> list[str]:
        payload = expect(
            self._client, "GET", "/patients", unreachable=BackendUnavailable
        )
        return list(payload["patient_ids"])

    def recover(self, instance_id: str, admin_token: str) -> dict:
        slow = JsonClient(
            self._base_url, ca_file=self._ca_file, timeout=RECOVER_TIMEOUT_S
        )
        try:
            return expect(
                slow,
                "POST",
                "/admin/recover",
                body={"instance_id": instance_id, "admin_token": admin_token},
                unreachable=BackendUnavailable,
            )
        finally:
            slow.close()

    def close(self) -> None:
        self._client.close()


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="healthvault healthcare app")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8600)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--registry-url", required=True)
    parser.add_argument("--vault-url", default=None)
    parser.add_argument("--datahost-url", default=None)
    parser.add_argument("--storage-kind", default="proposed_vault")
    parser.add_argument("--kdf-iterations", type=int, default=100_000)
    parser.add_argument(
        "--instance-id",
        default=None,
        help="resume this identity via reregister instead of registering fresh",
    )
    parser.add_argument(
        "--admin-token-env",
        default="HEALTHVAULT_ADMIN_TOKEN",
        help="environment variable holding the operator admin token",
    )
    parser.add_argument("--tls-cert", default=None)
    parser.add_argument("--tls-key", default=None)
    parser.add_argument("--ca-file", default=None)
    args = parser.parse_args(argv)

    admin_token = os.environ.get(args.admin_token_env)
    if not admin_token:
        parser.error(f"admin token not found in ${args.admin_token_env}")

    import uvicorn

    state = HealthApp(
        storage_kind=BackendKind(args.storage_kind),
        data_dir=Path(args.data_dir),
        registry_url=args.registry_url,
        vault_url=args.vault_url,
        datahost_url=args.datahost_url,
        kdf_iterations=args.kdf_iterations,
        admin_token=admin_token,
        instance_id=args.instance_id,
        ca_file=args.ca_file,
    )
    uvicorn.run(
        create_app(state),
        host=args.host,
        port=args.port,
        log_level="warning",
        timeout_keep_alive=75,
        ssl_certfile=args.tls_cert,
        ssl_keyfile=args.tls_key,
    )


if __name__ == "__main__":
    main()
