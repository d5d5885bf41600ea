"""Remote data host: plain storage for the Remote* comparison backends.

This is the conventional "remote server" the proposed design is measured
against: a box that stores what it is given, with no ledger, no owner
model, and no opinions about content. It exposes a filesystem facet (two
directories of files named by patient id) and a database facet (an
embedded SQL engine, one table per record kind). Existence decisions
belong to the app's local index, so every write here is an upsert.

Run standalone with ``python -m healthvault.datahost``.
"""

from __future__ import annotations

import argparse
import base64
import binascii
import os
import sqlite3
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .errors import (
    BackendUnavailable,
    HealthVaultError,
    InvalidRecord,
    NotFound,
    StorageFailure,
    error_payload,
)
from .httpkit import JsonClient, expect
from .model import RecordKind

_KIND_NAMES = tuple(kind.value for kind in RecordKind)


def _check_kind(kind: str) -> str:
    if kind not in _KIND_NAMES:
        raise InvalidRecord(f"unknown record kind {kind!r}")
    return kind


def _check_name(name: str) -> str:
    # File names come straight from patient ids; keep path tricks out.
    if not name or "/" in name or "\\" in name or name in (".", ".."):
        raise InvalidRecord(f"invalid patient id {name!r}")
    return name


class FileStore:
    """Two directories of patient-named files, byte-faithful."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        for kind in _KIND_NAMES:
            (self.root / kind).mkdir(parents=True, exist_ok=True)

    def _path(self, kind: str, name: str) -> Path:
        return self.root / _check_kind(kind) / _check_name(name)

    def put(self, kind: str, name: str, content: bytes) -> None:
        try:
            with open(self._path(kind, name), "wb") as fh:
                fh.write(content)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"file write failed: {exc}") from exc

    def get(self, kind: str, name: str) -> bytes:
        try:
            return self._path(kind, name).read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no {kind} file for {name!r}")
        except OSError as exc:
            raise StorageFailure(f"file read failed: {exc}") from exc

    def delete(self, kind: str, name: str) -> None:
        try:
            self._path(kind, name).unlink()
        except FileNotFoundError:
            raise NotFound(f"no {kind} file for {name!r}")
        except OSError as exc:
            raise StorageFailure(f"file delete failed: {exc}") from exc

    def list_names(self, kind: str) -> list[str]:
        return sorted(p.name for p in (self.root / _check_kind(kind)).iterdir())


class DatabaseStore:
    """SQLite rows, one table per record kind, keyed by patient id."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._local = threading.local()
        with self._conn() as conn:
            for kind in _KIND_NAMES:
                conn.execute(
                    f"CREATE TABLE IF NOT EXISTS rows_{kind} ("
                    "patient_id TEXT PRIMARY KEY, row TEXT NOT NULL)"
                )

    def _conn(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self.path, timeout=30.0)
            conn.execute("PRAGMA journal_mode=WAL")
            conn.execute("PRAGMA synchronous=NORMAL")
            self._local.conn = conn
        return conn

    def put(self, kind: str, patient_id: str, row: str) -> None:
        _check_kind(kind)
        with self._conn() as conn:
            conn.execute(
                f"INSERT INTO rows_{kind} (patient_id, row) VALUES (?, ?) "
                "ON CONFLICT(patient_id) DO UPDATE SET row = excluded.row",
                (patient_id, row),
            )

    def get(self, kind: str, patient_id: str) -> str:
        _check_kind(kind)
        cur = self._conn().execute(
            f"SELECT row FROM rows_{kind} WHERE patient_id = ?", (patient_id,)
        )
        found = cur.fetchone()
        if found is None:
            raise NotFound(f"no {kind} row for {patient_id!r}")
        return found[0]

    def delete(self, kind: str, patient_id: str) -> None:
        _check_kind(kind)
        with self._conn() as conn:
            cur = conn.execute(
                f"DELETE FROM rows_{kind} WHERE patient_id = ?", (patient_id,)
            )
            if cur.rowcount == 0:
                raise NotFound(f"no {kind} row for {patient_id!r}")

    def list_ids(self, kind: str) -> list[str]:
        _check_kind(kind)
        cur = self._conn().execute(f"SELECT patient_id FROM rows_{kind} ORDER BY patient_id")
        return [row[0] for row in cur.fetchall()]

    def close(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            conn.close()
            self._local.conn = None


class FilePutBody(BaseModel):
    content: str  # base64


class DbPutBody(BaseModel):
    row: str


def create_app(files: FileStore, database: DatabaseStore) -> FastAPI:
    app = FastAPI(title="healthvault datahost")

    @app.exception_handler(HealthVaultError)
    async def _domain_error(request: Request, exc: HealthVaultError):
        return JSONResponse(status_code=exc.http_status, content=error_payload(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "service": "datahost"}

    @app.put("/files/{kind}/{patient_id}")
    def file_put(kind: str, patient_id: str, body: FilePutBody):
        try:
            content = base64.b64decode(body.content, validate=True)
        except (binascii.Error, ValueError):
            raise InvalidRecord("content is not valid base64")
        files.put(kind, patient_id, content)
        return {"stored": True}

    @app.get("/files/{kind}/{patient_id}")
    def file_get(kind: str, patient_id: str):
        content = files.get(kind, patient_id)
        return {"content": base64.b64encode(content).decode("ascii")}

    @app.delete("/files/{kind}/{patient_id}")
    def file_delete(kind: str, patient_id: str):
        files.delete(kind, patient_id)
        return Response(status_code=204)

    @app.get("/files/{kind}")
    def file_list(kind: str):
        return {"names": files.list_names(kind)}

    @app.put("/db/{kind}/{patient_id}")
    def db_put(kind: str, patient_id: str, body: DbPutBody):
        database.put(kind, patient_id, body.row)
        return {"stored": True}

    @app.get("/db/{kind}/{patient_id}")
    def db_get(kind: str, patient_id: str):
        return {"row": database.get(kind, patient_id)}

    @app.delete("/db/{kind}/{patient_id}")
    def db_delete(kind: str, patient_id: str):
        database.delete(kind, patient_id)
        return Response(status_code=204)

    @app.get("/db/{kind}")
    def db_list(kind: str):
        return {"names": database.list_ids(kind)}

    return app


class DataHostClient:
    """HTTP client for both datahost facets; loss of the host surfaces as
    BackendUnavailable, which is exactly the severance condition."""

    def __init__(self, base_url: str, *, ca_file: str | Path | None = None) -> None:
        self._client = JsonClient(base_url, ca_file=ca_file)

    def file_put(self, kind: str, patient_id: str, content: bytes) -> None:
        expect(
            self._client,
            "PUT",
            f"/files/{kind}/{patient_id}",
            body={"content": base64.b64encode(content).decode("ascii")},
            unreachable=BackendUnavailable,
        )

    def file_get(self, kind: str, patient_id: str) -> bytes:
        payload = expect(
            self._client,
            "GET",
            f"/files/{kind}/{patient_id}",
            unreachable=BackendUnavailable,
        )
        return base64.b64decode(payload["content"])

    def file_delete(self, kind: str, patient_id: str) -> None:
        expect(
            self._client,
            "DELETE",
            f"/files/{kind}/{patient_id}",
            unreachable=BackendUnavailable,
        )

    def file_list(self, kind: str) -> list[str]:
        payload = expect(
            self._client, "GET", f"/files/{kind}", unreachable=BackendUnavailable
        )
        return list(payload["names"])

    def db_put(self, kind: str, patient_id: str, row: str) -> None:
        expect(
            self._client,
            "PUT",
            f"/db/{kind}/{patient_id}",
            body={"row": row},
            unreachable=BackendUnavailable,
        )

    def db_get(self, kind: str, patient_id: str) -> str:
        payload = expect(
            self._client,
            "GET",
            f"/db/{kind}/{patient_id}",
            unreachable=BackendUnavailable,
        )
        return payload["row"]

    def db_delete(self, kind: str, patient_id: str) -> None:
        expect(
            self._client,
            "DELETE",
            f"/db/{kind}/{patient_id}",
            unreachable=BackendUnavailable,
        )

    def db_list(self, kind: str) -> list[str]:
        payload = expect(
            self._client, "GET", f"/db/{kind}", unreachable=BackendUnavailable
        )
        return list(payload["names"])

    def close(self) -> None:
        self._client.close()


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="healthvault remote data host")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8603)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--tls-cert", default=None)
    parser.add_argument("--tls-key", default=None)
    args = parser.parse_args(argv)

    import uvicorn

    root = Path(args.data_dir)
    app = create_app(FileStore(root / "files"), DatabaseStore(root / "db.sqlite3"))
    uvicorn.run(
        app,
        host=args.host,
        port=args.port,
        log_level="warning",
        timeout_keep_alive=75,
        ssl_certfile=args.tls_cert,
        ssl_keyfile=args.tls_key,
    )


if __name__ == "__main__":
    main()
