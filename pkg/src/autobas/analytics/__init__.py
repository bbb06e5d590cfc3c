"""Analytics: change detection, setpoint optimization, and batch ETL."""

from autobas.analytics.detect import (
    ChangeDetector,
    ChangeEvent,
    EventKind,
    Evidence,
    Severity,
    scan,
)
from autobas.analytics.etl import ETLReport, etl_cycle
from autobas.analytics.optimize import (
    EvalOutcome,
    OptimizeResult,
    ParameterSchedule,
    ScheduleEntry,
    SearchSpace,
    optimize,
)

__all__ = [
    "ChangeDetector",
    "ChangeEvent",
    "ETLReport",
    "EvalOutcome",
    "EventKind",
    "Evidence",
    "OptimizeResult",
    "ParameterSchedule",
    "ScheduleEntry",
    "SearchSpace",
    "Severity",
    "etl_cycle",
    "optimize",
    "scan",
]
