"""Central instance registry: the anchor everything else recovers from.

An app instance registers once and receives (instance_id, license_key).
Those credentials never change: reregistering with the same instance_id
returns byte-identical values, which is what lets a rebuilt instance
re-derive its old encryption key after its host is destroyed. Entries are
appended to a journal and fsynced before any response leaves the service,
so a registry restart forgets nothing it acknowledged.

Run standalone with ``python -m healthvault.registry``.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import hmac
import secrets
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import (
    HealthVaultError,
    NameTaken,
    RegistryUnreachable,
    Unauthorized,
    UnknownInstance,
    error_payload,
)
from .httpkit import JsonClient, expect
from .journal import Journal
from .kdf import InstanceCredentials, derive_vault_token

LICENSE_KEY_ENTROPY_BYTES = 32  # 256 bits, hex-encoded to 64 chars


def hash_admin_token(admin_token: str) -> str:
    return hashlib.sha256(admin_token.encode("utf-8")).hexdigest()


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class RegistryStore:
    """In-memory view over the journal of issued credentials."""

    def __init__(self, journal_path: str | Path, admin_token_hash: str) -> None:
        self._journal = Journal(journal_path)
        self._admin_token_hash = admin_token_hash
        self._by_id: dict[str, dict] = {}
        self._names: set[str] = set()
        self._lock = threading.Lock()
        for entry in self._journal.replay():
            self._by_id[entry["instance_id"]] = entry
            if entry.get("name"):
                self._names.add(entry["name"])

    def check_admin(self, admin_token: str) -> None:
        if not hmac.compare_digest(hash_admin_token(admin_token), self._admin_token_hash):
            raise Unauthorized("admin token rejected")

    def register(self, name: str | None, admin_token: str) -> InstanceCredentials:
        self.check_admin(admin_token)
        with self._lock:
            if name and name in self._names:
                raise NameTaken(f"name {name!r} is already registered")
            instance_id = f"inst-{secrets.token_hex(6)}"
            while instance_id in self._by_id:
                instance_id = f"inst-{secrets.token_hex(6)}"
            entry = {
                "instance_id": instance_id,
                "license_key": secrets.token_hex(LICENSE_KEY_ENTROPY_BYTES),
                "name": name,
                "created_at": _utc_now(),
                "admin_token_hash": self._admin_token_hash,
            }
            # Durable before acknowledged: a crash after this line can lose
            # nothing the caller was told about.
            self._journal.append(entry)
            self._by_id[instance_id] = entry
            if name:
                self._names.add(name)
        return InstanceCredentials(instance_id, entry["license_key"])

    def reregister(self, instance_id: str, admin_token: str) -> InstanceCredentials:
        self.check_admin(admin_token)
        with self._lock:
            entry = self._by_id.get(instance_id)
        if entry is None:
            raise UnknownInstance(f"no instance registered as {instance_id!r}")
        return InstanceCredentials(entry["instance_id"], entry["license_key"])

    def verify_vault_token(self, instance_id: str, vault_token: str) -> bool:
        with self._lock:
            entry = self._by_id.get(instance_id)
        if entry is None:
            return False
        expected = derive_vault_token(
            InstanceCredentials(entry["instance_id"], entry["license_key"])
        )
        return hmac.compare_digest(expected, vault_token)

    def close(self) -> None:
        self._journal.close()


class RegisterBody(BaseModel):
    name: str | None = None
    admin_token: str


class ReregisterBody(BaseModel):
    instance_id: str
    admin_token: str


class VerifyOwnerBody(BaseModel):
    instance_id: str
    vault_token: str


def create_app(store: RegistryStore) -> FastAPI:
    app = FastAPI(title="healthvault registry")

    @app.exception_handler(HealthVaultError)
    async def _domain_error(request: Request, exc: HealthVaultError):
        return JSONResponse(status_code=exc.http_status, content=error_payload(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "service": "registry"}

    @app.post("/register")
    def register(body: RegisterBody):
        creds = store.register(body.name, body.admin_token)
        return {"instance_id": creds.instance_id, "license_key": creds.license_key}

    @app.post("/reregister")
    def reregister(body: ReregisterBody):
        creds = store.reregister(body.instance_id, body.admin_token)
        return {"instance_id": creds.instance_id, "license_key": creds.license_key}

    @app.post("/verify_owner")
    def verify_owner(body: VerifyOwnerBody):
        # Lets the vault confirm a bearer token without ever seeing a
        # license key. Boolean answer only; no credential material leaves.
        return {"valid": store.verify_vault_token(body.instance_id, body.vault_token)}

    return app


class RegistryClient:
    """HTTP client for the registry, raising the same typed errors."""

    def __init__(self, base_url: str, *, ca_file: str | Path | None = None) -> None:
        self._client = JsonClient(base_url, ca_file=ca_file)

    def register(self, admin_token: str, name: str | None = None) -> InstanceCredentials:
        payload = expect(
            self._client,
            "POST",
            "/register",
            body={"name": name, "admin_token": admin_token},
            unreachable=RegistryUnreachable,
        )
        return InstanceCredentials(payload["instance_id"], payload["license_key"])

    def reregister(self, instance_id: str, admin_token: str) -> InstanceCredentials:
        payload = expect(
            self._client,
            "POST",
            "/reregister",
            body={"instance_id": instance_id, "admin_token": admin_token},
            unreachable=RegistryUnreachable,
        )
        return InstanceCredentials(payload["instance_id"], payload["license_key"])

    def verify_owner(self, instance_id: str, vault_token: str) -> bool:
        payload = expect(
            self._client,
            "POST",
            "/verify_owner",
            body={"instance_id": instance_id, "vault_token": vault_token},
            unreachable=RegistryUnreachable,
        )
        return bool(payload["valid"])

    def close(self) -> None:
        self._client.close()


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="healthvault registry service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8601)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument(
        "--admin-token-hash",
        required=True,
        help="sha256 hex of the operator admin token; the token itself stays out-of-band",
    )
    parser.add_argument("--tls-cert", default=None)
    parser.add_argument("--tls-key", default=None)
    args = parser.parse_args(argv)

    import uvicorn

    store = RegistryStore(Path(args.data_dir) / "registry.jsonl", args.admin_token_hash)
    uvicorn.run(
        create_app(store),
        host=args.host,
        port=args.port,
        log_level="warning",
        timeout_keep_alive=75,
        ssl_certfile=args.tls_cert,
        ssl_keyfile=args.tls_key,
    )


if __name__ == "__main__":
    main()
