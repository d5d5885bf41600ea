"""Minimal keep-alive JSON-over-HTTP client shared by every service client.

Built directly on http.client because the benchmark pushes hundreds of
thousands of small requests through these clients and per-request session
overhead would dominate the numbers being measured. One persistent
connection per (client, thread); connections idle longer than
_IDLE_RECONNECT_S are proactively replaced rather than reused, which keeps
us clear of the server's keep-alive timeout without ever re-sending a
request the server might already have processed. Only GETs are retried
after a mid-request connection drop.
"""

from __future__ import annotations

import http.client
import json
import socket
import ssl
import threading
import time
from pathlib import Path
from urllib.parse import urlsplit

from .errors import HealthVaultError, exception_from_payload

# Servers are configured with a 75s keep-alive window; see procs.py.
_IDLE_RECONNECT_S = 30.0

_RETRYABLE = (
    http.client.RemoteDisconnected,
    http.client.BadStatusLine,
    ConnectionResetError,
    BrokenPipeError,
)


class TransportFailure(Exception):
    """The service could not be reached or the connection died mid-request."""


class JsonClient:
    """Persistent-connection JSON client for one base URL.

    Safe for concurrent use; each thread gets its own connection.
    """

    def __init__(
        self,
        base_url: str,
        *,
        ca_file: str | Path | None = None,
        timeout: float = 10.0,
    ) -> None:
        parts = urlsplit(base_url)
        if parts.scheme not in ("http", "https") or not parts.hostname:
            raise ValueError(f"unsupported base URL {base_url!r}")
        self._tls = parts.scheme == "https"
        self._host = parts.hostname
        self._port = parts.port or (443 if self._tls else 80)
        self._timeout = timeout
        self._context: ssl.SSLContext | None = None
        if self._tls:
            self._context = ssl.create_default_context(
                cafile=str(ca_file) if ca_file else None
            )
        self._local = threading.local()
        self._all_conns: list[http.client.HTTPConnection] = []
        self._conns_lock = threading.Lock()

    @property
    def base_url(self) -> str:
        scheme = "https" if self._tls else "http"
        return f"{scheme}://{self._host}:{self._port}"

    def _new_connection(self) -> http.client.HTTPConnection:
        if self._tls:
            conn: http.client.HTTPConnection = http.client.HTTPSConnection(
                self._host, self._port, timeout=self._timeout, context=self._context
            )
        else:
            conn = http.client.HTTPConnection(
                self._host, self._port, timeout=self._timeout
            )
        with self._conns_lock:
            self._all_conns.append(conn)
        return conn

    def _drop_connection(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            with self._conns_lock:
                if conn in self._all_conns:
                    self._all_conns.remove(conn)
            conn.close()
        self._local.conn = None

    def _checkout(self) -> tuple[http.client.HTTPConnection, bool]:
        """Return (connection, reused) for this thread."""
        conn = getattr(self._local, "conn", None)
        last_used = getattr(self._local, "last_used", 0.0)
        if conn is not None and time.monotonic() - last_used > _IDLE_RECONNECT_S:
            self._drop_connection()
            conn = None
        if conn is None:
            return self._new_connection(), False
        return conn, True

    def _send(
        self, method: str, path: str, body: bytes | None, headers: dict[str, str]
    ) -> tuple[int, bytes]:
        conn, reused = self._checkout()
        try:
            conn.request(method, path, body=body, headers=headers)
            response = conn.getresponse()
            data = response.read()
        except _RETRYABLE:
            self._drop_connection()
            # A reused connection may have been closed while idle; the request
            # was never processed, so GETs are safe to resend once.
            if reused and method == "GET":
                conn = self._new_connection()
                try:
                    conn.request(method, path, body=body, headers=headers)
                    response = conn.getresponse()
                    data = response.read()
                except (OSError, http.client.HTTPException) as exc:
                    self._drop_connection()
                    raise TransportFailure(f"{method} {path}: {exc}") from exc
            else:
                raise TransportFailure(f"{method} {path}: connection dropped")
        except (OSError, http.client.HTTPException) as exc:
            self._drop_connection()
            raise TransportFailure(f"{method} {path}: {exc}") from exc
        self._local.conn = conn
        self._local.last_used = time.monotonic()
        return response.status, data

    def request(
        self,
        method: str,
        path: str,
        *,
        body: dict | None = None,
        headers: dict[str, str] | None = None,
    ) -> tuple[int, dict]:
        """Issue one request, returning (status, parsed JSON body).

        Raises TransportFailure when the service is unreachable. Empty
        response bodies (204s) come back as {}.
        """
        payload = None
        send_headers = dict(headers or {})
        if body is not None:
            payload = json.dumps(body).encode("utf-8")
            send_headers["Content-Type"] = "application/json"
        status, data = self._send(method, path, payload, send_headers)
        if not data:
            return status, {}
        try:
            return status, json.loads(data)
        except json.JSONDecodeError as exc:
            raise TransportFailure(
                f"{method} {path}: non-JSON response (status {status})"
            ) from exc

    def close(self) -> None:
        with self._conns_lock:
            conns, self._all_conns = self._all_conns, []
        for conn in conns:
            conn.close()
        self._local.conn = None


def raise_for_status(status: int, payload: dict) -> None:
    """Re-raise a service error payload as its typed exception."""
    if status < 400:
        return
    raise exception_from_payload(status, payload)


def expect(
    client: JsonClient,
    method: str,
    path: str,
    *,
    body: dict | None = None,
    headers: dict[str, str] | None = None,
    unreachable: type[HealthVaultError] | None = None,
) -> dict:
    """Request + raise typed errors; map transport loss to `unreachable`."""
    try:
        status, payload = client.request(method, path, body=body, headers=headers)
    except TransportFailure as exc:
        if unreachable is not None:
            raise unreachable(str(exc)) from exc
        raise
    raise_for_status(status, payload)
    return payload


def wait_until_ready(
    base_url: str,
    *,
    ca_file: str | Path | None = None,
    deadline_s: float = 15.0,
) -> None:
    """Poll GET /health until the service answers 200 or the deadline passes."""
    client = JsonClient(base_url, ca_file=ca_file, timeout=1.0)
    deadline = time.monotonic() + deadline_s
    last_error: Exception | None = None
    try:
        while time.monotonic() < deadline:
            try:
                status, _ = client.request("GET", "/health")
                if status == 200:
                    return
            except (TransportFailure, socket.timeout) as exc:
                last_error = exc
            time.sleep(0.05)
    finally:
        client.close()
    raise TransportFailure(f"{base_url} not ready after {deadline_s}s: {last_error}")
