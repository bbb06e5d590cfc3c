"""Wire types shared across the stack.

Everything that crosses a layer boundary lives here: change-of-value sensor
messages, actuator commands, and the per-tick state vector. StateVector has a
canonical byte-stable JSON form because replay tests compare serialized
vectors byte for byte.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from autobas.errors import ValidationError


class Quality(str, enum.Enum):
    GOOD = "Good"
    SUSPECT = "Suspect"


class Source(str, enum.Enum):
    NATIVE = "Native"
    LEGACY_BAS = "LegacyBAS"


class Provenance(str, enum.Enum):
    OBSERVED = "Observed"
    IMPUTED = "Imputed"


@dataclass(frozen=True)
class SensorMessage:
    """One change-of-value report from a single point.

    seq_no is strictly increasing per point; ts is simulated milliseconds
    since the epoch configured for the run.
    """

    device_id: str
    point_id: str
    seq_no: int
    ts: int
    value: float
    unit: str
    quality: Quality = Quality.GOOD
    source: Source = Source.NATIVE

    def problems(self) -> list[str]:
        out = []
        if not self.device_id:
            out.append("device_id is empty")
        if not self.point_id:
            out.append("point_id is empty")
        if self.seq_no < 1:
            out.append(f"seq_no must be >= 1, got {self.seq_no}")
        if not isinstance(self.value, (int, float)) or not math.isfinite(self.value):
            out.append(f"value must be finite, got {self.value!r}")
        return out

    def validate(self) -> None:
        problems = self.problems()
        if problems:
            raise ValidationError(
                f"invalid message for point {self.point_id!r}: " + "; ".join(problems),
                problems,
            )

    def dedup_key(self) -> tuple[str, str, int]:
        return (self.device_id, self.point_id, self.seq_no)

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "point_id": self.point_id,
            "seq_no": self.seq_no,
            "ts": self.ts,
            "value": self.value,
            "unit": self.unit,
            "quality": self.quality.value,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SensorMessage:
        return cls(
            device_id=d["device_id"],
            point_id=d["point_id"],
            seq_no=int(d["seq_no"]),
            ts=int(d["ts"]),
            value=float(d["value"]),
            unit=d["unit"],
            quality=Quality(d["quality"]),
            source=Source(d["source"]),
        )


@dataclass(frozen=True)
class ActuatorCommand:
    """A command to one actuator: verb 'set' carries a value, 'start'/'stop'
    do not."""

    target: str
    verb: str
    value: float | None = None
    issued_by: str = "runtime"

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "verb": self.verb,
            "value": self.value,
            "issued_by": self.issued_by,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ActuatorCommand:
        value = d.get("value")
        return cls(
            target=d["target"],
            verb=d["verb"],
            value=None if value is None else float(value),
            issued_by=d.get("issued_by", "runtime"),
        )


@dataclass(frozen=True)
class PointEntry:
    """One point's slot in a state vector.

    age_ticks is 0 for a fresh observation and counts ticks since the last
    observation otherwise; for points never observed it counts ticks since
    the run started (the value then comes from the registry baseline mean).
    """

    value: float
    provenance: Provenance
    age_ticks: int
    quality: Quality = Quality.GOOD
    late: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "provenance": self.provenance.value,
            "age_ticks": self.age_ticks,
            "quality": self.quality.value,
            "late": self.late,
        }

    @classmethod
    def from_dict(cls, d: dict) -> PointEntry:
        return cls(
            value=float(d["value"]),
            provenance=Provenance(d["provenance"]),
            age_ticks=int(d["age_ticks"]),
            quality=Quality(d["quality"]),
            late=bool(d["late"]),
        )


@dataclass
class StateVector:
    """Unified snapshot of every registered point at one tick."""

    tick: int
    ts: int
    entries: dict[str, PointEntry] = field(default_factory=dict)

    def canonical_json(self) -> str:
        # Sorted keys and plain repr floats keep the byte form reproducible.
        doc = {
            "tick": self.tick,
            "ts": self.ts,
            "entries": {pid: e.to_dict() for pid, e in sorted(self.entries.items())},
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, raw: str) -> StateVector:
        doc = json.loads(raw)
        return cls(
            tick=int(doc["tick"]),
            ts=int(doc["ts"]),
            entries={
                pid: PointEntry.from_dict(e) for pid, e in doc["entries"].items()
            },
        )

    def value(self, point_id: str) -> float:
        return self.entries[point_id].value
