"""Stream engine: turns sparse change-of-value telemetry into one coherent
state vector per tick.

Each tick the engine drains the telemetry topic, normalizes units through
per-point affine transforms, and builds a vector with an entry for every
registered point:

* a point observed this tick carries its latest in-window value (highest
  seq_no wins) with provenance Observed and age 0;
* a silent point carries its last value forward with provenance Imputed and
  an incremented age;
* a point never observed since engine start is seeded from its registry
  baseline mean, aged in ticks since start.

Messages for unregistered points are never dropped: they are re-published to
a quarantine topic and counted, so the discovery layer can see the gap.
Vectors persist to the repository with bounded retry; a vector that cannot
land is parked on a dead-letter list and raised as an alarm event, and the
loop keeps running.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Protocol

from autobas.errors import ValidationError
from autobas.messages import (
    PointEntry,
    Provenance,
    Quality,
    SensorMessage,
    StateVector,
)

logger = logging.getLogger(__name__)


# ----------------------------------------------------------------------
# unit normalization
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TransformSpec:
    """Affine unit conversion for one point: canonical = scale·raw + offset,
    applied when a message arrives in ``from_unit``. An optional validity
    clamp bounds the converted value."""

    point_id: str
    from_unit: str
    to_unit: str
    scale: float
    offset: float = 0.0
    clamp_lo: float | None = None
    clamp_hi: float | None = None

    def __post_init__(self):
        problems = []
        if not self.point_id:
            problems.append("point_id must be non-empty")
        if not self.from_unit or not self.to_unit:
            problems.append("from_unit and to_unit must be non-empty")
        if self.from_unit == self.to_unit:
            problems.append("from_unit and to_unit must differ")
        if self.scale == 0:
            problems.append("scale must be non-zero (conversion must be invertible)")
        if (
            self.clamp_lo is not None
            and self.clamp_hi is not None
            and self.clamp_lo > self.clamp_hi
        ):
            problems.append("clamp_lo must be <= clamp_hi")
        if problems:
            raise ValidationError(
                f"invalid transform for {self.point_id!r}: " + "; ".join(problems),
                problems,
            )

    def apply(self, value: float, unit: str) -> tuple[float, str]:
        """Convert (value, unit) into canonical form; values already in a
        different unit pass through untouched."""

        if unit != self.from_unit:
            return value, unit
        out = self.scale * value + self.offset
        if self.clamp_lo is not None:
            out = max(out, self.clamp_lo)
        if self.clamp_hi is not None:
            out = min(out, self.clamp_hi)
        return out, self.to_unit

    def invert(self, value: float) -> float:
        return (value - self.offset) / self.scale

    def to_dict(self) -> dict:
        doc = {
            "point_id": self.point_id,
            "from_unit": self.from_unit,
            "to_unit": self.to_unit,
            "scale": self.scale,
            "offset": self.offset,
        }
        if self.clamp_lo is not None:
            doc["clamp_lo"] = self.clamp_lo
        if self.clamp_hi is not None:
            doc["clamp_hi"] = self.clamp_hi
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> TransformSpec:
        return cls(
            point_id=doc["point_id"],
            from_unit=doc["from_unit"],
            to_unit=doc["to_unit"],
            scale=float(doc["scale"]),
            offset=float(doc.get("offset", 0.0)),
            clamp_lo=doc.get("clamp_lo"),
            clamp_hi=doc.get("clamp_hi"),
        )


def load_transforms(docs: Iterable[Mapping]) -> dict[str, TransformSpec]:
    out: dict[str, TransformSpec] = {}
    for doc in docs:
        spec = TransformSpec.from_dict(doc)
        if spec.point_id in out:
            raise ValidationError(f"duplicate transform for point {spec.point_id!r}")
        out[spec.point_id] = spec
    return out


# ----------------------------------------------------------------------
# registry view protocol
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PointView:
    """What the stream engine needs to know about one registered point."""

    device_id: str
    point_id: str
    unit: str
    baseline_mean: float


class RegistryView(Protocol):
    def lookup(self, device_id: str, point_id: str) -> PointView | None: ...

    def point_views(self) -> Iterable[PointView]: ...


class StaticRegistryView:
    """A fixed in-memory registry view, mainly for tests and tooling."""

    def __init__(self, points: Iterable[PointView]):
        self._points = sorted(points, key=lambda p: p.point_id)
        self._index = {(p.device_id, p.point_id): p for p in self._points}

    def lookup(self, device_id: str, point_id: str) -> PointView | None:
        return self._index.get((device_id, point_id))

    def point_views(self) -> list[PointView]:
        return list(self._points)


# ----------------------------------------------------------------------
# tick assembly
# ----------------------------------------------------------------------


def ingest_tick(
    batch: Iterable[SensorMessage],
    prev: StateVector | None,
    registry: RegistryView,
    transforms: Mapping[str, TransformSpec],
    tick: int,
    ts: int,
    *,
    start_tick: int = 0,
    tick_ms: int = 60_000,
) -> tuple[StateVector, list[SensorMessage]]:
    """Assemble the state vector for one tick window [ts, ts + tick_ms).

    Returns the vector and the list of messages that belong to no registered
    point (for quarantine). ``prev`` is the previous tick's vector (or None
    at engine start); ``start_tick`` anchors the age of never-observed
    points."""

    quarantined: list[SensorMessage] = []
    updates: dict[str, tuple[SensorMessage, float, str]] = {}

    for msg in batch:
        view = registry.lookup(msg.device_id, msg.point_id)
        if view is None:
            quarantined.append(msg)
            continue
        value, unit = msg.value, msg.unit
        spec = transforms.get(msg.point_id)
        if spec is not None:
            value, unit = spec.apply(value, unit)
        incumbent = updates.get(msg.point_id)
        if incumbent is None or msg.seq_no > incumbent[0].seq_no:
            updates[msg.point_id] = (msg, value, unit)

    entries: dict[str, PointEntry] = {}
    for view in registry.point_views():
        pid = view.point_id
        update = updates.get(pid)
        if update is not None:
            msg, value, unit = update
            quality = msg.quality
            if unit != view.unit:
                logger.warning(
                    "point %s arrived in unit %r (canonical %r, no transform); "
                    "value kept, quality downgraded",
                    pid,
                    unit,
                    view.unit,
                )
                quality = Quality.SUSPECT
            entries[pid] = PointEntry(
                value=value,
                provenance=Provenance.OBSERVED,
                age_ticks=0,
                quality=quality,
                late=msg.ts < ts,
            )
            continue
        carried = prev.entries.get(pid) if prev is not None else None
        if carried is not None:
            entries[pid] = PointEntry(
                value=carried.value,
                provenance=Provenance.IMPUTED,
                age_ticks=carried.age_ticks + 1,
                quality=carried.quality,
                late=carried.late,
            )
        else:
            entries[pid] = PointEntry(
                value=view.baseline_mean,
                provenance=Provenance.IMPUTED,
                age_ticks=tick - start_tick + 1,
                quality=Quality.GOOD,
                late=False,
            )

    return StateVector(tick=tick, ts=ts, entries=entries), quarantined


# ----------------------------------------------------------------------
# engine
# ----------------------------------------------------------------------


class StreamEngine:
    """Stateful wrapper that drains the broker, assembles vectors, routes
    quarantine, and persists with bounded retry."""

    def __init__(
        self,
        broker,
        registry: RegistryView,
        transforms: Mapping[str, TransformSpec] | None = None,
        *,
        telemetry_topic: str = "telemetry",
        quarantine_topic: str = "quarantine",
        consumer: str = "stream-engine",
        persist: Callable[[StateVector], None] | None = None,
        on_alarm: Callable[[dict], None] | None = None,
        persist_attempts: int = 3,
        start_tick: int = 0,
        tick_seconds: int = 60,
    ):
        self.broker = broker
        self.registry = registry
        self.transforms = dict(transforms or {})
        self.telemetry_topic = telemetry_topic
        self.quarantine_topic = quarantine_topic
        self.consumer = consumer
        self._persist = persist
        self._on_alarm = on_alarm
        self.persist_attempts = max(1, persist_attempts)
        self.start_tick = start_tick
        self.tick_ms = tick_seconds * 1000
        self.prev: StateVector | None = None
        self.quarantine_count = 0
        self.dead_letter: list[StateVector] = []

    def rehydrate(self, sv: StateVector) -> None:
        """Resume from a previously persisted vector (crash recovery)."""

        self.prev = sv

    def _drain(self, window_end: int) -> list[SensorMessage]:
        """Consume admitted telemetry up to (not including) the first message
        timestamped at or beyond ``window_end``. Window-aware consumption
        makes replaying a fully persisted log batch-identical to a live
        interleaved run."""

        if self.telemetry_topic not in self.broker.topics():
            return []
        position = self.broker.committed(self.telemetry_topic, self.consumer)
        batch: list[SensorMessage] = []
        for offset, msg in self.broker.read(self.telemetry_topic, position):
            if msg.ts >= window_end:
                break
            batch.append(msg)
            position = offset + 1
        if batch:
            self.broker.commit(self.telemetry_topic, self.consumer, position)
        return batch

    def advance(self, tick: int, ts: int) -> StateVector:
        batch = self._drain(ts + self.tick_ms)
        sv, quarantined = ingest_tick(
            batch,
            self.prev,
            self.registry,
            self.transforms,
            tick,
            ts,
            start_tick=self.start_tick,
            tick_ms=self.tick_ms,
        )
        for msg in quarantined:
            self.broker.publish(self.quarantine_topic, msg)
            self.quarantine_count += 1
        self._persist_with_retry(sv)
        self.prev = sv
        return sv

    def _persist_with_retry(self, sv: StateVector) -> None:
        if self._persist is None:
            return
        last_error: Exception | None = None
        for _ in range(self.persist_attempts):
            try:
                self._persist(sv)
                return
            except Exception as exc:  # noqa: BLE001 - repository boundary
                last_error = exc
        self.dead_letter.append(sv)
        logger.error(
            "state vector for tick %d dead-lettered after %d attempts: %s",
            sv.tick,
            self.persist_attempts,
            last_error,
        )
        if self._on_alarm is not None:
            self._on_alarm(
                {
                    "kind": "PersistFailure",
                    "tick": sv.tick,
                    "attempts": self.persist_attempts,
                    "detail": str(last_error),
                }
            )
