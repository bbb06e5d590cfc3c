"""Repository record types: device/point registrations, baselines, and
automation rules."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping

from autobas.errors import ValidationError
from autobas.messages import Source

BASELINE_PROVENANCES = ("StartUpCx", "OCx")


@dataclass(frozen=True)
class OperatingRange:
    """Manufacturer-stated validity range for one point."""

    lo: float
    hi: float
    unit: str

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(
                f"operating range must satisfy lo < hi, got [{self.lo}, {self.hi}]"
            )

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "unit": self.unit}

    @classmethod
    def from_dict(cls, d: Mapping) -> OperatingRange:
        return cls(lo=float(d["lo"]), hi=float(d["hi"]), unit=d["unit"])


@dataclass(frozen=True)
class Baseline:
    """Statistical reference for one point over an observation window."""

    mean: float
    std: float
    sample_count: int
    window_ticks: int

    def __post_init__(self):
        problems = []
        if self.std < 0:
            problems.append(f"std must be >= 0, got {self.std}")
        if self.sample_count < 1:
            problems.append(f"sample_count must be >= 1, got {self.sample_count}")
        if self.window_ticks < 1:
            problems.append(f"window_ticks must be >= 1, got {self.window_ticks}")
        if problems:
            raise ValidationError("invalid baseline: " + "; ".join(problems), problems)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "sample_count": self.sample_count,
            "window_ticks": self.window_ticks,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Baseline:
        return cls(
            mean=float(d["mean"]),
            std=float(d["std"]),
            sample_count=int(d["sample_count"]),
            window_ticks=int(d["window_ticks"]),
        )


@dataclass(frozen=True)
class PointRecord:
    """Registration of one point: identity, canonical unit, classification,
    validity range, and active baseline."""

    point_id: str
    unit: str
    clazz: str
    operating_range: OperatingRange
    baseline: Baseline | None = None  # absent until first commissioning capture

    def __post_init__(self):
        if not self.point_id:
            raise ValidationError("point_id must be non-empty")

    def to_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "unit": self.unit,
            "clazz": self.clazz,
            "operating_range": self.operating_range.to_dict(),
            "baseline": self.baseline.to_dict() if self.baseline else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PointRecord:
        return cls(
            point_id=d["point_id"],
            unit=d["unit"],
            clazz=d["clazz"],
            operating_range=OperatingRange.from_dict(d["operating_range"]),
            baseline=(
                Baseline.from_dict(d["baseline"]) if d.get("baseline") else None
            ),
        )


@dataclass(frozen=True)
class DeviceRecord:
    """Registration of one device and the points it owns."""

    device_id: str
    system: str
    clazz: str
    points: tuple[PointRecord, ...]
    source: Source = Source.NATIVE
    commissioned_at: int = 0
    registry_only: bool = False

    def __post_init__(self):
        problems = []
        if not self.device_id:
            problems.append("device_id must be non-empty")
        if not self.points:
            problems.append("device must own at least one point")
        ids = [p.point_id for p in self.points]
        if len(set(ids)) != len(ids):
            problems.append("duplicate point_id within device")
        if problems:
            raise ValidationError(
                f"invalid device record {self.device_id!r}: " + "; ".join(problems),
                problems,
            )

    def point(self, point_id: str) -> PointRecord | None:
        for p in self.points:
            if p.point_id == point_id:
                return p
        return None

    def with_point(self, updated: PointRecord) -> DeviceRecord:
        points = tuple(
            updated if p.point_id == updated.point_id else p for p in self.points
        )
        return replace(self, points=points)

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "system": self.system,
            "clazz": self.clazz,
            "points": [p.to_dict() for p in self.points],
            "source": self.source.value,
            "commissioned_at": self.commissioned_at,
            "registry_only": self.registry_only,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> DeviceRecord:
        return cls(
            device_id=d["device_id"],
            system=d["system"],
            clazz=d["clazz"],
            points=tuple(PointRecord.from_dict(p) for p in d["points"]),
            source=Source(d.get("source", "Native")),
            commissioned_at=int(d.get("commissioned_at", 0)),
            registry_only=bool(d.get("registry_only", False)),
        )


# ----------------------------------------------------------------------
# rules
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TriggerPattern:
    """Event pattern a rule fires on; None fields are wildcards."""

    event_kind: str
    system: str | None = None
    severity: str | None = None
    mode: str | None = None

    def __post_init__(self):
        if not self.event_kind:
            raise ValidationError("trigger event_kind must be non-empty")

    def matches(self, event: Mapping) -> bool:
        if event.get("kind") != self.event_kind:
            return False
        if self.system is not None and event.get("system") != self.system:
            return False
        if self.severity is not None and event.get("severity") != self.severity:
            return False
        if self.mode is not None and event.get("mode") != self.mode:
            return False
        return True

    def to_dict(self) -> dict:
        return {
            "event_kind": self.event_kind,
            "system": self.system,
            "severity": self.severity,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> TriggerPattern:
        return cls(
            event_kind=d["event_kind"],
            system=d.get("system"),
            severity=d.get("severity"),
            mode=d.get("mode"),
        )


@dataclass(frozen=True)
class RuleAction:
    """One step of a rule: which actor to drive and with what command."""

    actor_id: str
    command: Mapping
    priority: int = 100

    def __post_init__(self):
        if not self.actor_id:
            raise ValidationError("action actor_id must be non-empty")

    def to_dict(self) -> dict:
        return {
            "actor_id": self.actor_id,
            "command": dict(self.command),
            "priority": self.priority,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> RuleAction:
        return cls(
            actor_id=d["actor_id"],
            command=dict(d["command"]),
            priority=int(d.get("priority", 100)),
        )


@dataclass(frozen=True)
class Rule:
    rule_id: str
    trigger: TriggerPattern
    actions: tuple[RuleAction, ...]
    enabled: bool = True
    is_default: bool = False

    def __post_init__(self):
        if not self.rule_id:
            raise ValidationError("rule_id must be non-empty")
        if not self.actions:
            raise ValidationError(f"rule {self.rule_id!r} must have at least one action")

    def to_dict(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "trigger": self.trigger.to_dict(),
            "actions": [a.to_dict() for a in self.actions],
            "enabled": self.enabled,
            "is_default": self.is_default,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Rule:
        return cls(
            rule_id=d["rule_id"],
            trigger=TriggerPattern.from_dict(d["trigger"]),
            actions=tuple(RuleAction.from_dict(a) for a in d["actions"]),
            enabled=bool(d.get("enabled", True)),
            is_default=bool(d.get("is_default", False)),
        )
