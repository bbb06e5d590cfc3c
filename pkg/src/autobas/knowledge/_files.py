"""Small file primitives shared by the repository zones.

Snapshots are written atomically (temp file + rename). JSON-lines streams are
read tolerantly: a torn final line — the signature of a crash mid-append — is
dropped; corruption anywhere else is an error, because earlier lines were
durable and must parse.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from autobas.errors import ConflictError


def atomic_write_json(path: Path, doc) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, sort_keys=True, indent=1))
    os.replace(tmp, path)


def read_json(path: Path, default=None):
    if not path.exists():
        return default
    return json.loads(path.read_text())


def read_jsonl(path: Path) -> list:
    """Parse a JSON-lines file, dropping a torn trailing line."""

    if not path.exists():
        return []
    rows = []
    lines = path.read_text().splitlines()
    for i, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                break  # crash artifact: incomplete final append
            raise ConflictError(f"{path}: corrupt line {i + 1}")
    return rows


class AppendLog:
    """An append-only JSON-lines stream with optional fsync per append."""

    def __init__(self, path: Path, fsync: bool):
        self.path = path
        self.fsync = fsync
        self._fh = None

    def append(self, doc) -> None:
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("a")
        self._fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
