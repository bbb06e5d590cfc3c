"""Durable in-process message fabric.

Topics are append-only JSON-lines logs with contiguous offsets assigned at
admission. Exactly-once delivery is the sum of two halves:

* idempotent admission — a (device_id, point_id, seq_no) triple is admitted
  once; replays return the original offset without appending, so repeats
  cannot re-enter the log and trigger duplicate processing downstream;
* resumable consumption — consumers commit the next offset they want to
  read, commits are persisted, and a re-subscribe after a crash continues
  from the committed position.

One lock serializes all mutation; concurrent publishers interleave at message
granularity and each topic log stays gap-free and FIFO.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
from pathlib import Path

from autobas.errors import ConflictError, NotFoundError, ValidationError
from autobas.messages import SensorMessage

logger = logging.getLogger(__name__)

_TOPIC_RE = re.compile(r"^[a-zA-Z0-9_.-]+$")
COMMITS_FILE = "_commits.json"


class Cursor:
    """A consumer's read position on one topic; fetch() drains what is
    currently available and advances."""

    def __init__(self, broker: Broker, topic: str, position: int):
        self._broker = broker
        self.topic = topic
        self.position = position

    def fetch(self, max_messages: int | None = None) -> list[tuple[int, SensorMessage]]:
        entries = self._broker.read(self.topic, self.position, max_messages)
        if entries:
            self.position = entries[-1][0] + 1
        return entries

    def __iter__(self):
        while True:
            batch = self.fetch(256)
            if not batch:
                return
            yield from batch


class Broker:
    def __init__(self, root: str | Path, fsync: bool = False):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.fsync = fsync
        self._lock = threading.RLock()
        self._logs: dict[str, list[SensorMessage]] = {}
        self._dedup: dict[str, dict[tuple[str, str, int], int]] = {}
        self._files: dict[str, object] = {}
        self._commits: dict[str, dict[str, int]] = {}
        self._recover()

    # ------------------------------------------------------------------
    # recovery
    # ------------------------------------------------------------------

    def _recover(self) -> None:
        for path in sorted(self.root.glob("*.jsonl")):
            topic = path.stem
            log: list[SensorMessage] = []
            index: dict[tuple[str, str, int], int] = {}
            with path.open() as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    doc = json.loads(line)
                    offset = int(doc.pop("offset"))
                    if offset != len(log):
                        raise ConflictError(
                            f"topic {topic!r}: log corrupt, offset {offset} "
                            f"where {len(log)} expected"
                        )
                    msg = SensorMessage.from_dict(doc)
                    index[msg.dedup_key()] = offset
                    log.append(msg)
            self._logs[topic] = log
            self._dedup[topic] = index
        commits_path = self.root / COMMITS_FILE
        if commits_path.exists():
            self._commits = json.loads(commits_path.read_text())

    # ------------------------------------------------------------------
    # publication
    # ------------------------------------------------------------------

    def publish(self, topic: str, msg: SensorMessage) -> int:
        """Admit one message; returns its offset. A duplicate
        (device_id, point_id, seq_no) returns the original offset."""

        if not _TOPIC_RE.match(topic or ""):
            raise ValidationError(f"illegal topic name {topic!r}")
        msg.validate()
        with self._lock:
            if topic not in self._logs:
                self._logs[topic] = []
                self._dedup[topic] = {}
                logger.info("topic %r auto-created", topic)
            index = self._dedup[topic]
            key = msg.dedup_key()
            if key in index:
                return index[key]
            log = self._logs[topic]
            offset = len(log)
            self._append_line(topic, offset, msg)
            log.append(msg)
            index[key] = offset
            return offset

    def publish_batch(self, topic: str, msgs: list[SensorMessage]) -> list[int]:
        return [self.publish(topic, m) for m in msgs]

    def _append_line(self, topic: str, offset: int, msg: SensorMessage) -> None:
        fh = self._files.get(topic)
        if fh is None:
            fh = (self.root / f"{topic}.jsonl").open("a")
            self._files[topic] = fh
        record = {"offset": offset, **msg.to_dict()}
        fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        fh.flush()
        if self.fsync:
            os.fsync(fh.fileno())

    # ------------------------------------------------------------------
    # consumption
    # ------------------------------------------------------------------

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._logs)

    def high_water_mark(self, topic: str) -> int:
        """Next offset that will be assigned on this topic."""

        with self._lock:
            self._require_topic(topic)
            return len(self._logs[topic])

    def read(
        self, topic: str, from_offset: int, limit: int | None = None
    ) -> list[tuple[int, SensorMessage]]:
        with self._lock:
            self._require_topic(topic)
            log = self._logs[topic]
            if from_offset >= len(log):
                return []
            end = len(log) if limit is None else min(len(log), from_offset + limit)
            return [(i, log[i]) for i in range(max(0, from_offset), end)]

    def subscribe(
        self,
        topic: str,
        from_offset: int | None = None,
        consumer: str | None = None,
    ) -> Cursor:
        """Open a cursor. With a consumer name and no explicit offset the
        cursor resumes from that consumer's committed position (0 when
        fresh). An offset beyond the high-water mark yields an empty cursor,
        not an error."""

        with self._lock:
            self._require_topic(topic)
            if from_offset is None:
                from_offset = self.committed(topic, consumer) if consumer else 0
            return Cursor(self, topic, max(0, from_offset))

    def _require_topic(self, topic: str) -> None:
        if topic not in self._logs:
            raise NotFoundError(f"unknown topic {topic!r}")

    # ------------------------------------------------------------------
    # commits
    # ------------------------------------------------------------------

    def commit(self, topic: str, consumer: str, offset: int) -> None:
        """Persist a consumer's next-offset-to-read; never regresses."""

        with self._lock:
            self._require_topic(topic)
            current = self._commits.get(topic, {}).get(consumer, 0)
            if offset < current:
                raise ConflictError(
                    f"commit regression on {topic!r}/{consumer!r}: "
                    f"{offset} < {current}"
                )
            self._commits.setdefault(topic, {})[consumer] = offset
            tmp = self.root / (COMMITS_FILE + ".tmp")
            tmp.write_text(json.dumps(self._commits, sort_keys=True))
            os.replace(tmp, self.root / COMMITS_FILE)

    def committed(self, topic: str, consumer: str) -> int:
        with self._lock:
            return self._commits.get(topic, {}).get(consumer, 0)

    # ------------------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            for fh in self._files.values():
                fh.close()  # type: ignore[attr-defined]
            self._files.clear()
