"""Knowledge repository: device registry, rule store, and the real-time and
historical data zones, file-backed under one directory tree."""

from autobas.knowledge.records import (
    BASELINE_PROVENANCES,
    Baseline,
    DeviceRecord,
    OperatingRange,
    PointRecord,
    Rule,
    RuleAction,
    TriggerPattern,
)
from autobas.knowledge.registry import DeviceRegistry
from autobas.knowledge.repository import COMMISSIONING_REPORT, KnowledgeRepository
from autobas.knowledge.rules import RuleStore
from autobas.knowledge.zones import (
    HistoricalZone,
    HistSlice,
    RealTimeZone,
    RtSlice,
    aggregate_vectors,
)

__all__ = [
    "BASELINE_PROVENANCES",
    "Baseline",
    "COMMISSIONING_REPORT",
    "DeviceRecord",
    "DeviceRegistry",
    "HistSlice",
    "HistoricalZone",
    "KnowledgeRepository",
    "OperatingRange",
    "PointRecord",
    "RealTimeZone",
    "RtSlice",
    "Rule",
    "RuleAction",
    "RuleStore",
    "TriggerPattern",
    "aggregate_vectors",
]
