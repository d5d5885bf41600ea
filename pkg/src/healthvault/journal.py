"""Append-only JSONL journal with fsync-before-acknowledge semantics.

The registry, the vault ledger, and the app's patient index all persist the
same way: one JSON object per line, appended and fsynced before the caller
is told the write happened. Crash recovery therefore only ever faces one
kind of damage, a torn final line from a write that was never acknowledged;
replay drops it and truncates. A corrupt line anywhere else means the file
was tampered with or the disk lied, and that is an error, not something to
repair silently.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from .errors import StorageFailure


class Journal:
    """One append-only JSONL file. Appends are thread-safe and durable."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._fh = None

    def replay(self) -> list[dict]:
        """Read every committed entry, repairing a torn tail if present."""
        if not self.path.exists():
            return []
        entries: list[dict] = []
        with open(self.path, "rb") as fh:
            raw = fh.read()
        offset = 0
        for line in raw.splitlines(keepends=True):
            stripped = line.strip()
            if stripped:
                try:
                    entries.append(json.loads(stripped))
                except json.JSONDecodeError:
                    if offset + len(line) >= len(raw):
                        # Unacknowledged torn tail from a crash mid-append.
                        self._truncate(offset)
                        return entries
                    raise StorageFailure(
                        f"{self.path}: corrupt journal line at byte {offset}"
                    )
            offset += len(line)
        return entries

    def _truncate(self, size: int) -> None:
        with self._lock:
            self._close_handle()
            with open(self.path, "r+b") as fh:
                fh.truncate(size)
                fh.flush()
                os.fsync(fh.fileno())

    def append(self, entry: dict) -> None:
        line = json.dumps(entry, separators=(",", ":")).encode("utf-8") + b"\n"
        with self._lock:
            if self._fh is None:
                self._fh = open(self.path, "ab")
            try:
                self._fh.write(line)
                self._fh.flush()
                os.fsync(self._fh.fileno())
            except OSError as exc:
                raise StorageFailure(f"{self.path}: append failed: {exc}") from exc

    def _close_handle(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def close(self) -> None:
        with self._lock:
            self._close_handle()
