"""Windowed change detection over state vectors.

Every deviation is classified as exactly one of two kinds:

* **Fault** — the point left its manufacturer operating range (windowed mean
  or any sample) or more than half the window is Suspect quality. Faults are
  Critical and need the interfacing layer.
* **ConceptDrift** — readings stay in range but the windowed mean departs the
  statistical baseline by more than ``k`` standard deviations and stays out
  for at least ``persistence`` consecutive ticks. Drift is a Warning the
  building heals itself: re-optimize, then re-baseline.

The detector is deterministic and auditable — a z-score with persistence
rather than a learned model — but sits behind a small interface(observe /
resolve / rebaselined) so a different detector can be swapped in.

At most one event per (target, kind) is open at a time; the caller resolves
an event when its ticket closes or its re-baseline lands. Points without a
baseline (new equipment awaiting commissioning) never produce drift events;
they are surfaced once through ``commissioning_needed``.
"""

from __future__ import annotations

import logging
import statistics
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping

from autobas.errors import NotFoundError
from autobas.messages import Quality, StateVector

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 30
DEFAULT_K = 4.0
DEFAULT_PERSISTENCE = 10
DEFAULT_ZERO_STD_TOLERANCE = 1.0


class EventKind(str, Enum):
    FAULT = "Fault"
    CONCEPT_DRIFT = "ConceptDrift"


class Severity(str, Enum):
    INFO = "Info"
    WARNING = "Warning"
    CRITICAL = "Critical"


@dataclass(frozen=True)
class Evidence:
    """The comparison that fired: ``value`` exceeded ``threshold`` for the
    named statistic over ``window`` ticks."""

    statistic: str
    value: float
    threshold: float
    window: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "value": self.value,
            "threshold": self.threshold,
            "window": self.window,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Evidence:
        return cls(
            statistic=d["statistic"],
            value=float(d["value"]),
            threshold=float(d["threshold"]),
            window=int(d["window"]),
        )


@dataclass(frozen=True)
class ChangeEvent:
    event_id: str
    kind: EventKind
    target: str  # point_id
    system: str
    detected_at: int  # tick
    evidence: Evidence
    severity: Severity

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "kind": self.kind.value,
            "target": self.target,
            "system": self.system,
            "detected_at": self.detected_at,
            "evidence": self.evidence.to_dict(),
            "severity": self.severity.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ChangeEvent:
        return cls(
            event_id=d["event_id"],
            kind=EventKind(d["kind"]),
            target=d["target"],
            system=d["system"],
            detected_at=int(d["detected_at"]),
            evidence=Evidence.from_dict(d["evidence"]),
            severity=Severity(d["severity"]),
        )


class ChangeDetector:
    """Feed one state vector per tick; collect events.

    ``registry`` needs ``owner_of(point_id) -> DeviceRecord`` (raising
    NotFoundError for strangers), which supplies the operating range,
    baseline, class, and parent system for each point.
    """

    def __init__(
        self,
        registry,
        *,
        window: int = DEFAULT_WINDOW,
        k: float = DEFAULT_K,
        persistence: int = DEFAULT_PERSISTENCE,
        zero_std_tolerance: float | Mapping[str, float] = DEFAULT_ZERO_STD_TOLERANCE,
        on_commissioning_needed: Callable[[str, int], None] | None = None,
    ):
        if window < 1:
            raise ValueError("window must be >= 1")
        if persistence < 1:
            raise ValueError("persistence must be >= 1")
        self.registry = registry
        self.window = window
        self.k = k
        self.persistence = persistence
        self._zero_std_tolerance = zero_std_tolerance
        self._on_commissioning_needed = on_commissioning_needed

        self._buffers: dict[str, deque] = {}
        self._drift_run: dict[str, int] = {}
        self._open: set[tuple[str, EventKind]] = set()
        self._suppressed: set[str] = set()
        self._commissioning_raised: set[str] = set()
        self._degenerate_warned: set[str] = set()
        self.commissioning_needed: list[str] = []

    # ------------------------------------------------------------------
    # lifecycle hooks for the control layer
    # ------------------------------------------------------------------

    def open_events(self) -> set[tuple[str, EventKind]]:
        return set(self._open)

    def resolve(self, target: str, kind: EventKind) -> None:
        """Mark the open event handled so the predicate may fire again."""

        self._open.discard((target, kind))

    def suppress_drift(self, target: str) -> None:
        """Ignore drift on a point while its re-baseline is in flight, so the
        healing action does not read as a second drift."""

        self._suppressed.add(target)
        self._drift_run[target] = 0

    def rebaselined(self, target: str) -> None:
        """A new baseline is active: restart the point's statistics."""

        self._buffers.pop(target, None)
        self._drift_run.pop(target, None)
        self._suppressed.discard(target)
        self._commissioning_raised.discard(target)
        self._open.discard((target, EventKind.CONCEPT_DRIFT))

    def reset(self) -> None:
        """Forget everything (used when the building re-initializes)."""

        self._buffers.clear()
        self._drift_run.clear()
        self._open.clear()
        self._suppressed.clear()
        self._commissioning_raised.clear()
        self.commissioning_needed.clear()

    # ------------------------------------------------------------------
    # detection
    # ------------------------------------------------------------------

    def _tolerance_for(self, clazz: str) -> float:
        if isinstance(self._zero_std_tolerance, Mapping):
            return float(
                self._zero_std_tolerance.get(
                    clazz, self._zero_std_tolerance.get("*", DEFAULT_ZERO_STD_TOLERANCE)
                )
            )
        return float(self._zero_std_tolerance)

    def observe(self, sv: StateVector) -> list[ChangeEvent]:
        events: list[ChangeEvent] = []
        for point_id in sorted(sv.entries):
            entry = sv.entries[point_id]
            try:
                device = self.registry.owner_of(point_id)
            except NotFoundError:
                continue
            record = device.point(point_id)
            buf = self._buffers.get(point_id)
            if buf is None or buf.maxlen != self.window:
                buf = deque(buf or (), maxlen=self.window)
                self._buffers[point_id] = buf
            buf.append((entry.value, entry.quality is Quality.SUSPECT))
            if len(buf) < self.window:
                continue

            values = [v for v, _ in buf]
            win_mean = statistics.fmean(values)
            rng = record.operating_range

            # --- fault predicate: range violation or quality collapse ---
            excursion = max(
                max(v - rng.hi, rng.lo - v) for v in values + [win_mean]
            )
            suspect_fraction = sum(1 for _, s in buf if s) / self.window
            fault_evidence = None
            if excursion > 0:
                fault_evidence = Evidence(
                    "range_violation", excursion, 0.0, self.window
                )
            elif suspect_fraction > 0.5:
                fault_evidence = Evidence(
                    "suspect_fraction", suspect_fraction, 0.5, self.window
                )
            if fault_evidence is not None:
                self._drift_run[point_id] = 0
                key = (point_id, EventKind.FAULT)
                if key not in self._open:
                    self._open.add(key)
                    events.append(
                        ChangeEvent(
                            event_id=f"fault-{point_id}-{sv.tick:09d}",
                            kind=EventKind.FAULT,
                            target=point_id,
                            system=device.system,
                            detected_at=sv.tick,
                            evidence=fault_evidence,
                            severity=Severity.CRITICAL,
                        )
                    )
                continue  # dichotomy: a faulting window is never drift

            # --- drift predicate: persistent in-range mean shift ---
            baseline = record.baseline
            if baseline is None:
                if point_id not in self._commissioning_raised:
                    self._commissioning_raised.add(point_id)
                    self.commissioning_needed.append(point_id)
                    if self._on_commissioning_needed is not None:
                        self._on_commissioning_needed(point_id, sv.tick)
                continue
            if point_id in self._suppressed:
                continue

            if baseline.std > 0:
                value = abs(win_mean - baseline.mean) / baseline.std
                threshold = self.k
                statistic = "mean_shift_z"
            else:
                if point_id not in self._degenerate_warned:
                    self._degenerate_warned.add(point_id)
                    logger.warning(
                        "point %s has a zero-std baseline; falling back to "
                        "absolute tolerance", point_id,
                    )
                value = abs(win_mean - baseline.mean)
                threshold = self._tolerance_for(record.clazz)
                statistic = "mean_shift_abs"

            if value > threshold:
                self._drift_run[point_id] = self._drift_run.get(point_id, 0) + 1
            else:
                self._drift_run[point_id] = 0
            key = (point_id, EventKind.CONCEPT_DRIFT)
            if self._drift_run[point_id] >= self.persistence and key not in self._open:
                self._open.add(key)
                events.append(
                    ChangeEvent(
                        event_id=f"drift-{point_id}-{sv.tick:09d}",
                        kind=EventKind.CONCEPT_DRIFT,
                        target=point_id,
                        system=device.system,
                        detected_at=sv.tick,
                        evidence=Evidence(statistic, value, threshold, self.window),
                        severity=Severity.WARNING,
                    )
                )
        return events


def scan(
    vectors: Iterable[StateVector],
    registry,
    **config,
) -> list[ChangeEvent]:
    """Run a fresh detector over a sequence of vectors (batch form)."""

    detector = ChangeDetector(registry, **config)
    out: list[ChangeEvent] = []
    for sv in vectors:
        out.extend(detector.observe(sv))
    return out
