"""The vault: an opaque key-value store with per-owner reference ledgers.

The vault never sees plaintext and never parses what it stores. Each blob
gets a fresh UUID, the UUID is appended to the owning instance's ledger,
and that ledger is the whole recovery story: an instance that lost every
local byte asks for its reference list, fetches each blob, and decrypts
them with the key it re-derived from its registry credentials.

Blobs live one-per-file as raw bytes; the ledger and owner bindings live in
an append-only journal. Both are fsynced before a request is acknowledged,
so killing and restarting the vault loses nothing.

Run standalone with ``python -m healthvault.vault``.
"""

from __future__ import annotations

import argparse
import base64
import binascii
import datetime
import hashlib
import hmac
import os
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .errors import (
    HealthVaultError,
    NotFound,
    StorageFailure,
    UnauthorizedOwner,
    VaultUnreachable,
    error_payload,
)
from .httpkit import JsonClient, expect
from .journal import Journal
from .kdf import InstanceCredentials, derive_vault_token
from .registry import RegistryClient


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _hash_token(token: str) -> str:
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


class VaultStore:
    """Blob files plus a journal of ledger and owner-binding events."""

    def __init__(self, data_dir: str | Path, verify_owner=None) -> None:
        """verify_owner: callable (instance_id, token) -> bool, usually the
        registry; None refuses every first-contact owner."""
        self._root = Path(data_dir)
        self._blob_root = self._root / "blobs"
        self._blob_root.mkdir(parents=True, exist_ok=True)
        self._journal = Journal(self._root / "ledger.jsonl")
        self._verify_owner = verify_owner
        self._lock = threading.Lock()
        self._owner_of: dict[str, str] = {}  # live ref -> owner
        self._ledgers: dict[str, dict[str, None]] = {}  # owner -> ordered live refs
        self._owner_tokens: dict[str, str] = {}  # owner -> sha256 of bearer token
        for entry in self._journal.replay():
            op = entry["op"]
            if op == "create":
                self._owner_of[entry["ref"]] = entry["owner"]
                self._ledgers.setdefault(entry["owner"], {})[entry["ref"]] = None
            elif op == "delete":
                owner = self._owner_of.pop(entry["ref"], None)
                if owner is not None:
                    self._ledgers.get(owner, {}).pop(entry["ref"], None)
            elif op == "bind_owner":
                self._owner_tokens[entry["owner"]] = entry["token_hash"]
            else:
                raise StorageFailure(f"unknown journal op {op!r}")

    # -- owner authentication ------------------------------------------------

    def authenticate(self, authorization: str | None) -> str:
        """Resolve an Authorization header to a verified owner instance_id.

        First contact for an instance_id is checked against the registry and
        the token hash is then pinned in the journal, so later requests (and
        vault restarts) never need the registry again.
        """
        if not authorization or not authorization.startswith("Bearer "):
            raise UnauthorizedOwner("missing bearer credentials")
        credential = authorization[len("Bearer ") :].strip()
        owner, sep, token = credential.partition(".")
        if not sep or not owner or not token:
            raise UnauthorizedOwner("malformed bearer credentials")
        token_hash = _hash_token(token)
        with self._lock:
            pinned = self._owner_tokens.get(owner)
        if pinned is not None:
            if not hmac.compare_digest(pinned, token_hash):
                raise UnauthorizedOwner(f"bad token for {owner!r}")
            return owner
        if self._verify_owner is None or not self._verify_owner(owner, token):
            raise UnauthorizedOwner(f"{owner!r} is not a registered instance")
        with self._lock:
            if owner not in self._owner_tokens:
                self._journal.append(
                    {"op": "bind_owner", "owner": owner, "token_hash": token_hash}
                )
                self._owner_tokens[owner] = token_hash
        return owner

    # -- blob operations -----------------------------------------------------

    def _blob_path(self, ref: str) -> Path:
        # Two-level fanout keeps directories comfortable at benchmark scale.
        return self._blob_root / ref[:2] / ref

    def create(self, owner: str, blob: bytes) -> str:
        ref = str(uuid.uuid4())
        path = self._blob_path(ref)
        path.parent.mkdir(exist_ok=True)
        try:
            with open(path, "wb") as fh:
                fh.write(blob)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"blob write failed: {exc}") from exc
        with self._lock:
            # Blob hits disk first; a crash here leaves an orphan file that
            # no ledger mentions, never a ledger entry with no blob.
            self._journal.append(
                {"op": "create", "ref": ref, "owner": owner, "stored_at": _utc_now()}
            )
            self._owner_of[ref] = owner
            self._ledgers.setdefault(owner, {})[ref] = None
        return ref

    def get(self, ref: str) -> bytes:
        with self._lock:
            live = ref in self._owner_of
        if not live:
            raise NotFound(f"no data stored under {ref!r}")
        try:
            return self._blob_path(ref).read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no data stored under {ref!r}")
        except OSError as exc:
            raise StorageFailure(f"blob read failed: {exc}") from exc

    def delete(self, ref: str) -> None:
        with self._lock:
            owner = self._owner_of.get(ref)
            if owner is None:
                raise NotFound(f"no data stored under {ref!r}")
            self._journal.append({"op": "delete", "ref": ref})
            del self._owner_of[ref]
            self._ledgers[owner].pop(ref, None)
        try:
            self._blob_path(ref).unlink()
        except OSError:
            pass  # ledger already says deleted; an orphan file is harmless

    def list_refs(self, owner: str) -> list[str]:
        with self._lock:
            return list(self._ledgers.get(owner, {}))

    def close(self) -> None:
        self._journal.close()


class CreateBody(BaseModel):
    blob: str  # base64


def create_app(store: VaultStore) -> FastAPI:
    app = FastAPI(title="healthvault vault")

    @app.exception_handler(HealthVaultError)
    async def _domain_error(request: Request, exc: HealthVaultError):
        return JSONResponse(status_code=exc.http_status, content=error_payload(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "service": "vault"}

    @app.post("/data")
    def create(body: CreateBody, request: Request):
        owner = store.authenticate(request.headers.get("authorization"))
        try:
            blob = base64.b64decode(body.blob, validate=True)
        except (binascii.Error, ValueError):
            raise StorageFailure("blob is not valid base64")
        return {"ref": store.create(owner, blob)}

    @app.get("/data/{ref}")
    def get(ref: str):
        blob = store.get(ref)
        return {"blob": base64.b64encode(blob).decode("ascii")}

    @app.delete("/data/{ref}")
    def delete(ref: str):
        store.delete(ref)
        return Response(status_code=204)

    @app.get("/references")
    def references(request: Request):
        owner = store.authenticate(request.headers.get("authorization"))
        return {"refs": store.list_refs(owner)}

    return app


class VaultClient:
    """HTTP client for the vault. Credentials are optional for get/delete."""

    def __init__(
        self,
        base_url: str,
        credentials: InstanceCredentials | None = None,
        *,
        ca_file: str | Path | None = None,
    ) -> None:
        self._client = JsonClient(base_url, ca_file=ca_file)
        self._auth_headers: dict[str, str] = {}
        if credentials is not None:
            token = derive_vault_token(credentials)
            self._auth_headers = {
                "Authorization": f"Bearer {credentials.instance_id}.{token}"
            }

    def create(self, blob: bytes) -> str:
        payload = expect(
            self._client,
            "POST",
            "/data",
            body={"blob": base64.b64encode(blob).decode("ascii")},
            headers=self._auth_headers,
            unreachable=VaultUnreachable,
        )
        return payload["ref"]

    def get(self, ref: str) -> bytes:
        payload = expect(
            self._client, "GET", f"/data/{ref}", unreachable=VaultUnreachable
        )
        return base64.b64decode(payload["blob"])

    def delete(self, ref: str) -> None:
        expect(self._client, "DELETE", f"/data/{ref}", unreachable=VaultUnreachable)

    def list_refs(self) -> list[str]:
        payload = expect(
            self._client,
            "GET",
            "/references",
            headers=self._auth_headers,
            unreachable=VaultUnreachable,
        )
        return list(payload["refs"])

    def close(self) -> None:
        self._client.close()


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="healthvault vault service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8602)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--registry-url", required=True)
    parser.add_argument("--tls-cert", default=None)
    parser.add_argument("--tls-key", default=None)
    parser.add_argument(
        "--ca-file", default=None, help="trust root for talking to the registry"
    )
    args = parser.parse_args(argv)

    import uvicorn

    registry = RegistryClient(args.registry_url, ca_file=args.ca_file)
    store = VaultStore(Path(args.data_dir), verify_owner=registry.verify_owner)
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
