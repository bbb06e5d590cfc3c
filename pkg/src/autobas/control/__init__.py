"""Autonomic core: the mode state machine, commissioning processes, and the
liveness watchdog."""

from autobas.control.commissioning import (
    CommissioningItem,
    CommissioningReport,
    CommissioningSession,
    OCxChain,
    OCxManager,
)
from autobas.control.statemachine import (
    TRANSITIONS,
    ModeState,
    StateMachine,
    transition,
)
from autobas.control.watchdog import Watchdog

__all__ = [
    "CommissioningItem",
    "CommissioningReport",
    "CommissioningSession",
    "ModeState",
    "OCxChain",
    "OCxManager",
    "StateMachine",
    "TRANSITIONS",
    "Watchdog",
    "transition",
]
