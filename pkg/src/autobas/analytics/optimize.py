"""Setpoint-schedule search over a digital-twin evaluator.

The search space is a discrete grid of setpoints per time-of-day window. A
candidate assignment is scored by an evaluator (in production: a cloned
simulator run under the proposed schedule) returning simulated energy and the
fraction of the horizon every zone stayed inside its comfort band.

Small grids are searched exhaustively; anything beyond the evaluation budget
falls back to coordinate descent from the incumbent schedule. Candidates are
enumerated in ascending setpoint order window-by-window, and only a strictly
better feasible score displaces the best — so equal-energy ties resolve to
the lowest setpoint in the earliest window, deterministically.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from autobas.errors import EvaluationError, ValidationError

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
DEFAULT_BUDGET = 64
DEFAULT_COMFORT_MIN = 0.95


@dataclass(frozen=True)
class ScheduleEntry:
    start_minute: int  # inclusive, minute of day
    end_minute: int  # exclusive
    setpoint: float
    unit: str

    def to_dict(self) -> dict:
        return {
            "start_minute": self.start_minute,
            "end_minute": self.end_minute,
            "setpoint": self.setpoint,
            "unit": self.unit,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ScheduleEntry:
        return cls(
            start_minute=int(d["start_minute"]),
            end_minute=int(d["end_minute"]),
            setpoint=float(d["setpoint"]),
            unit=d["unit"],
        )


@dataclass(frozen=True)
class ParameterSchedule:
    """A full-day setpoint plan for one system plus the energy it scored."""

    system: str
    entries: tuple[ScheduleEntry, ...]
    objective_value: float  # simulated kWh over the evaluation horizon
    established_at: int  # tick

    def __post_init__(self):
        if not self.entries:
            raise ValidationError("schedule must have at least one entry")
        cursor = 0
        for e in self.entries:
            if e.start_minute != cursor:
                raise ValidationError(
                    f"schedule windows must partition the day: window starts "
                    f"at minute {e.start_minute}, expected {cursor}"
                )
            if e.end_minute <= e.start_minute:
                raise ValidationError("schedule window must have positive length")
            cursor = e.end_minute
        if cursor != MINUTES_PER_DAY:
            raise ValidationError(
                f"schedule windows must cover the full day; coverage ends at "
                f"minute {cursor}"
            )

    def setpoint_at(self, minute_of_day: int) -> float:
        m = minute_of_day % MINUTES_PER_DAY
        for e in self.entries:
            if e.start_minute <= m < e.end_minute:
                return e.setpoint
        raise AssertionError("windows partition the day")  # unreachable

    def setpoints(self) -> tuple[float, ...]:
        return tuple(e.setpoint for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "entries": [e.to_dict() for e in self.entries],
            "objective_value": self.objective_value,
            "established_at": self.established_at,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ParameterSchedule:
        return cls(
            system=d["system"],
            entries=tuple(ScheduleEntry.from_dict(e) for e in d["entries"]),
            objective_value=float(d["objective_value"]),
            established_at=int(d["established_at"]),
        )


@dataclass(frozen=True)
class SearchSpace:
    """Discrete candidate setpoints over a partition of the day."""

    system: str
    unit: str
    windows: tuple[tuple[int, int], ...]  # (start_minute, end_minute)
    candidates: tuple[float, ...]  # ascending

    def __post_init__(self):
        if not self.candidates:
            raise ValidationError("search space needs at least one candidate")
        ordered = tuple(sorted(set(self.candidates)))
        if ordered != self.candidates:
            raise ValidationError("candidates must be strictly ascending")
        cursor = 0
        for lo, hi in self.windows:
            if lo != cursor or hi <= lo:
                raise ValidationError("windows must partition the day in order")
            cursor = hi
        if cursor != MINUTES_PER_DAY:
            raise ValidationError("windows must cover the full day")

    def grid_size(self) -> int:
        return len(self.candidates) ** len(self.windows)

    def schedule_for(
        self, assignment: Sequence[float], *, objective: float, tick: int
    ) -> ParameterSchedule:
        entries = tuple(
            ScheduleEntry(lo, hi, sp, self.unit)
            for (lo, hi), sp in zip(self.windows, assignment)
        )
        return ParameterSchedule(
            system=self.system,
            entries=entries,
            objective_value=objective,
            established_at=tick,
        )


@dataclass(frozen=True)
class EvalOutcome:
    """One candidate's score: energy to minimize, comfort to satisfy."""

    energy_kwh: float
    comfort_fraction: float


Evaluator = Callable[[tuple[float, ...]], EvalOutcome]


@dataclass(frozen=True)
class OptimizeResult:
    schedule: ParameterSchedule | None
    status: str  # "optimal" | "infeasible"
    evaluations: int
    improved: bool  # assignment differs from the incumbent's

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def _evaluate(
    evaluator: Evaluator, assignment: tuple[float, ...], retries: int
) -> EvalOutcome:
    last: Exception | None = None
    for attempt in range(retries + 1):
        try:
            return evaluator(assignment)
        except Exception as exc:  # noqa: BLE001 — evaluator is foreign code
            last = exc
            logger.warning(
                "evaluation of %s failed (attempt %d/%d): %s",
                assignment, attempt + 1, retries + 1, exc,
            )
    raise EvaluationError(
        f"evaluator failed {retries + 1} times for assignment {assignment}"
    ) from last


def _project(space: SearchSpace, value: float) -> float:
    """Nearest grid candidate; equidistant resolves to the lower one."""

    return min(space.candidates, key=lambda c: (abs(c - value), c))


def optimize(
    space: SearchSpace,
    evaluator: Evaluator,
    incumbent: ParameterSchedule | None,
    *,
    tick: int,
    comfort_min: float = DEFAULT_COMFORT_MIN,
    budget: int = DEFAULT_BUDGET,
    retries: int = 1,
    max_passes: int = 8,
) -> OptimizeResult:
    """Find the feasible schedule with minimum evaluated energy.

    Feasible means comfort_fraction >= comfort_min. If nothing in the space
    is feasible the incumbent is returned unchanged with status
    "infeasible" — escalation is the caller's job. Evaluator exceptions are
    retried once per candidate, then raised as EvaluationError.
    """

    n_windows = len(space.windows)
    evaluations = 0
    best_assignment: tuple[float, ...] | None = None
    best_energy = float("inf")

    def consider(assignment: tuple[float, ...]) -> None:
        nonlocal evaluations, best_assignment, best_energy
        outcome = _evaluate(evaluator, assignment, retries)
        evaluations += 1
        if outcome.comfort_fraction < comfort_min:
            return
        if outcome.energy_kwh < best_energy:  # strict: first minimum wins ties
            best_assignment = assignment
            best_energy = outcome.energy_kwh

    if space.grid_size() <= budget:
        for assignment in itertools.product(space.candidates, repeat=n_windows):
            consider(assignment)
    else:
        if incumbent is not None and len(incumbent.entries) == n_windows:
            current = tuple(_project(space, sp) for sp in incumbent.setpoints())
        else:
            current = tuple(space.candidates[0] for _ in range(n_windows))
        consider(current)
        if best_assignment is not None:
            current = best_assignment
        for _ in range(max_passes):
            moved = False
            for w in range(n_windows):
                for candidate in space.candidates:
                    if candidate == current[w]:
                        continue
                    trial = current[:w] + (candidate,) + current[w + 1 :]
                    before = best_assignment
                    consider(trial)
                    if best_assignment is not before:
                        moved = True
                if best_assignment is not None:
                    current = best_assignment
            if not moved:
                break

    if best_assignment is None:
        logger.warning(
            "no feasible schedule for %s after %d evaluations; keeping incumbent",
            space.system, evaluations,
        )
        return OptimizeResult(
            schedule=incumbent, status="infeasible",
            evaluations=evaluations, improved=False,
        )

    schedule = space.schedule_for(best_assignment, objective=best_energy, tick=tick)
    improved = incumbent is None or incumbent.setpoints() != schedule.setpoints()
    return OptimizeResult(
        schedule=schedule, status="optimal",
        evaluations=evaluations, improved=improved,
    )
