"""The two operating-data zones.

Real-time zone: a file-backed ring of per-tick state vectors spanning at
least the configured retention window. Writes are one JSON line per tick
(atomic at line granularity — a torn final line is the documented in-flight
loss window). Old vectors are evicted segment-file by segment-file, and only
after the batch export watermark has passed them: evicted_below ≤
exported_below is the zone-separation invariant.

Historical zone: append-only streams — hourly aggregates, analytic reports,
adopted parameter schedules, the baseline archive, and the control journal.
Appends are fsynced by default; nothing here is ever mutated in place.

Queries on both zones return slices with explicit coverage metadata rather
than silently truncating to what is retained.
"""

from __future__ import annotations

import statistics
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from autobas.errors import ConflictError, ValidationError
from autobas.knowledge._files import AppendLog, atomic_write_json, read_json, read_jsonl
from autobas.messages import PointEntry, StateVector

WATERMARKS_FILE = "watermarks.json"
AGGREGATE_STATS = ("mean", "min", "max", "std", "n")


@dataclass
class RtSlice:
    """Result of a real-time range read: the vectors plus what the request
    actually covered."""

    vectors: list[StateVector]
    requested_lo: int
    requested_hi: int
    retained_lo: int | None
    retained_hi: int | None
    missing: list[int] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return (
            self.retained_lo is not None
            and self.retained_lo <= self.requested_lo
            and self.retained_hi >= self.requested_hi
            and not self.missing
        )


class RealTimeZone:
    def __init__(
        self,
        root: Path,
        *,
        retention_ticks: int = 1440,
        segment_ticks: int = 60,
        fsync: bool = False,
    ):
        if segment_ticks < 1 or retention_ticks < segment_ticks:
            raise ValidationError(
                "retention_ticks must be >= segment_ticks and both positive"
            )
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.retention_ticks = retention_ticks
        self.segment_ticks = segment_ticks
        self.fsync = fsync
        self._lock = threading.RLock()
        self._vectors: dict[int, StateVector] = {}
        self._ticks: list[int] = []
        self._logs: dict[int, AppendLog] = {}
        self.exported_below = 0
        self.evicted_below = 0
        self._recover()

    # ------------------------------------------------------------------

    def _segment_start(self, tick: int) -> int:
        return (tick // self.segment_ticks) * self.segment_ticks

    def _segment_path(self, start: int) -> Path:
        return self.root / f"segment-{start:09d}.jsonl"

    def _recover(self) -> None:
        marks = read_json(self.root / WATERMARKS_FILE, default={})
        self.exported_below = int(marks.get("exported_below", 0))
        self.evicted_below = int(marks.get("evicted_below", 0))
        for path in sorted(self.root.glob("segment-*.jsonl")):
            for row in read_jsonl(path):
                sv = StateVector(
                    tick=int(row["tick"]),
                    ts=int(row["ts"]),
                    entries={
                        pid: PointEntry.from_dict(doc)
                        for pid, doc in row["entries"].items()
                    },
                )
                self._vectors[sv.tick] = sv
                self._ticks.append(sv.tick)
        self._ticks.sort()
        if self._ticks:
            lowest = self._segment_start(self._ticks[0])
            if lowest > self.evicted_below:
                # Segments below were deleted but the watermark write was
                # lost in a crash; reconstruct it.
                self.evicted_below = lowest

    def _persist_watermarks(self) -> None:
        atomic_write_json(
            self.root / WATERMARKS_FILE,
            {"exported_below": self.exported_below, "evicted_below": self.evicted_below},
        )

    # ------------------------------------------------------------------

    def write(self, sv: StateVector) -> None:
        """Append one tick's vector. Rewriting an already-stored tick with an
        identical payload is a no-op (idempotent persist); a different
        payload conflicts."""

        with self._lock:
            existing = self._vectors.get(sv.tick)
            if existing is not None:
                if existing.canonical_json() == sv.canonical_json():
                    return
                raise ConflictError(
                    f"tick {sv.tick} already persisted with different content"
                )
            if self._ticks and sv.tick < self._ticks[-1]:
                raise ConflictError(
                    f"tick {sv.tick} arrives after tick {self._ticks[-1]}; "
                    "real-time writes must be tick-ordered"
                )
            start = self._segment_start(sv.tick)
            log = self._logs.get(start)
            if log is None:
                log = AppendLog(self._segment_path(start), self.fsync)
                self._logs[start] = log
            log.append({
                "tick": sv.tick,
                "ts": sv.ts,
                "entries": {pid: e.to_dict() for pid, e in sorted(sv.entries.items())},
            })
            self._vectors[sv.tick] = sv
            self._ticks.append(sv.tick)

    def latest(self) -> StateVector | None:
        with self._lock:
            if not self._ticks:
                return None
            return self._vectors[self._ticks[-1]]

    def latest_tick(self) -> int | None:
        with self._lock:
            return self._ticks[-1] if self._ticks else None

    def read(self, lo_tick: int, hi_tick: int) -> RtSlice:
        """Read vectors for ticks in [lo_tick, hi_tick], with coverage
        metadata for anything outside the retained span."""

        if lo_tick > hi_tick:
            raise ValidationError(f"empty range [{lo_tick}, {hi_tick}]")
        with self._lock:
            if not self._ticks:
                return RtSlice([], lo_tick, hi_tick, None, None)
            retained_lo, retained_hi = self._ticks[0], self._ticks[-1]
            lo = max(lo_tick, retained_lo)
            hi = min(hi_tick, retained_hi)
            vectors = [
                self._vectors[t] for t in range(lo, hi + 1) if t in self._vectors
            ]
            missing = [t for t in range(lo, hi + 1) if t not in self._vectors]
            return RtSlice(vectors, lo_tick, hi_tick, retained_lo, retained_hi, missing)

    # ------------------------------------------------------------------
    # export / eviction
    # ------------------------------------------------------------------

    def mark_exported_below(self, tick: int) -> None:
        with self._lock:
            if tick < self.exported_below:
                raise ConflictError(
                    f"export watermark regression: {tick} < {self.exported_below}"
                )
            self.exported_below = tick
            self._persist_watermarks()

    def evict(self) -> int:
        """Drop whole segments that are both already exported and older than
        the retention window. Returns the number of vectors evicted."""

        with self._lock:
            if not self._ticks:
                return 0
            retention_floor = self._ticks[-1] - self.retention_ticks + 1
            boundary = self._segment_start(min(self.exported_below, retention_floor))
            if boundary <= self.evicted_below:
                return 0
            evicted = 0
            for start in sorted(self._logs):
                if start + self.segment_ticks <= boundary:
                    self._logs[start].close()
                    self._segment_path(start).unlink(missing_ok=True)
                    del self._logs[start]
            kept_ticks = []
            for t in self._ticks:
                if t < boundary:
                    del self._vectors[t]
                    evicted += 1
                else:
                    kept_ticks.append(t)
            self._ticks = kept_ticks
            self.evicted_below = boundary
            assert self.evicted_below <= self.exported_below, (
                "zone separation violated: eviction overtook export"
            )
            self._persist_watermarks()
            return evicted

    def close(self) -> None:
        with self._lock:
            for log in self._logs.values():
                log.close()


# ----------------------------------------------------------------------
# historical zone
# ----------------------------------------------------------------------


@dataclass
class HistSlice:
    """Result of a historical query: ordered (hour, value) series plus
    coverage metadata."""

    series: list[tuple[int, float]]
    requested_lo: int
    requested_hi: int
    covered_hours: list[int]
    missing_hours: list[int]

    @property
    def complete(self) -> bool:
        return not self.missing_hours


class HistoricalZone:
    def __init__(self, root: Path, *, fsync: bool = True):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._streams = {
            name: AppendLog(self.root / f"{name}.jsonl", fsync)
            for name in ("aggregates", "reports", "schedules", "baseline_archive", "journal")
        }
        self._aggregates: dict[int, dict] = {}
        self._reports: list[dict] = []
        self._schedules: list[dict] = []
        self._baseline_archive: list[dict] = []
        self._journal: list[dict] = []
        self._recover()

    def _recover(self) -> None:
        for row in read_jsonl(self.root / "aggregates.jsonl"):
            self._aggregates[int(row["hour"])] = row
        self._reports = read_jsonl(self.root / "reports.jsonl")
        self._schedules = read_jsonl(self.root / "schedules.jsonl")
        self._baseline_archive = read_jsonl(self.root / "baseline_archive.jsonl")
        self._journal = read_jsonl(self.root / "journal.jsonl")

    # ------------------------------------------------------------------
    # hourly aggregates
    # ------------------------------------------------------------------

    def append_aggregate(self, row: Mapping) -> bool:
        """Append one hour's aggregate row. Re-appending an identical row is
        a no-op (crash-resumed exports are idempotent); a conflicting row for
        an existing hour is an error. Returns True when the row was new."""

        doc = dict(row)
        for key in ("hour", "start_ts", "tick_lo", "tick_hi", "points"):
            if key not in doc:
                raise ValidationError(f"aggregate row missing field {key!r}")
        hour = int(doc["hour"])
        with self._lock:
            existing = self._aggregates.get(hour)
            if existing is not None:
                if _canonical(existing) == _canonical(doc):
                    return False
                raise ConflictError(f"aggregate for hour {hour} already exists")
            self._streams["aggregates"].append(doc)
            self._aggregates[hour] = doc
            return True

    def aggregated_hours(self) -> list[int]:
        with self._lock:
            return sorted(self._aggregates)

    def aggregate(self, hour: int) -> dict | None:
        with self._lock:
            return self._aggregates.get(hour)

    def query(self, point_id: str, lo_hour: int, hi_hour: int, stat: str) -> HistSlice:
        if stat not in AGGREGATE_STATS:
            raise ValidationError(
                f"unknown stat {stat!r}; expected one of {AGGREGATE_STATS}"
            )
        if lo_hour > hi_hour:
            raise ValidationError(f"empty range [{lo_hour}, {hi_hour}]")
        with self._lock:
            series: list[tuple[int, float]] = []
            covered: list[int] = []
            missing: list[int] = []
            for hour in range(lo_hour, hi_hour + 1):
                row = self._aggregates.get(hour)
                stats = row["points"].get(point_id) if row is not None else None
                if stats is None:
                    missing.append(hour)
                else:
                    covered.append(hour)
                    series.append((hour, float(stats[stat])))
            return HistSlice(series, lo_hour, hi_hour, covered, missing)

    # ------------------------------------------------------------------
    # reports / schedules / baselines / journal
    # ------------------------------------------------------------------

    def append_report(self, kind: str, body: Mapping) -> dict:
        if not kind:
            raise ValidationError("report kind must be non-empty")
        with self._lock:
            row = {"seq": len(self._reports), "kind": kind, "body": dict(body)}
            self._streams["reports"].append(row)
            self._reports.append(row)
            return row

    def reports(self, kind: str | None = None) -> list[dict]:
        with self._lock:
            if kind is None:
                return list(self._reports)
            return [r for r in self._reports if r["kind"] == kind]

    def append_schedule(self, body: Mapping) -> dict:
        with self._lock:
            row = {"seq": len(self._schedules), **dict(body)}
            self._streams["schedules"].append(row)
            self._schedules.append(row)
            return row

    def schedules(self) -> list[dict]:
        with self._lock:
            return list(self._schedules)

    def latest_schedule(self) -> dict | None:
        with self._lock:
            return self._schedules[-1] if self._schedules else None

    def archive_baseline(self, row: Mapping) -> None:
        with self._lock:
            doc = {"seq": len(self._baseline_archive), **dict(row)}
            self._streams["baseline_archive"].append(doc)
            self._baseline_archive.append(doc)

    def baseline_archive(self, point_id: str | None = None) -> list[dict]:
        with self._lock:
            if point_id is None:
                return list(self._baseline_archive)
            return [r for r in self._baseline_archive if r["point_id"] == point_id]

    def append_journal(self, body: Mapping) -> dict:
        with self._lock:
            row = {"seq": len(self._journal), **dict(body)}
            self._streams["journal"].append(row)
            self._journal.append(row)
            return row

    def journal(self) -> list[dict]:
        with self._lock:
            return list(self._journal)

    def close(self) -> None:
        with self._lock:
            for log in self._streams.values():
                log.close()


def _canonical(doc: Mapping) -> str:
    import json

    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def aggregate_vectors(
    vectors: list[StateVector], hour: int, tick_lo: int, tick_hi: int
) -> dict:
    """Compute one hourly aggregate row from the vectors of that hour."""

    if not vectors:
        raise ValidationError(f"no vectors to aggregate for hour {hour}")
    per_point: dict[str, list[float]] = {}
    for sv in vectors:
        for pid, entry in sv.entries.items():
            per_point.setdefault(pid, []).append(entry.value)
    points = {}
    for pid, values in sorted(per_point.items()):
        points[pid] = {
            "mean": statistics.fmean(values),
            "min": min(values),
            "max": max(values),
            "std": statistics.pstdev(values) if len(values) > 1 else 0.0,
            "n": len(values),
        }
    return {
        "hour": hour,
        "start_ts": vectors[0].ts,
        "tick_lo": tick_lo,
        "tick_hi": tick_hi,
        "points": points,
    }
