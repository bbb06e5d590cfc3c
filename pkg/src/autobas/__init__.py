"""Autonomic building automation.

A self-managing building runtime: a physics-backed building simulator feeds a
durable ordered message fabric; a streaming stage assembles per-tick state
vectors into a knowledge repository; analytics watch for faults and concept
drift, re-optimize equipment schedules against a digital twin, and archive
hourly history; a mode state machine and commissioning workflows coordinate
the whole loop; an interfacing layer turns events into actor tickets and
exposes an HTTP/JSON operations surface.
"""

from autobas.errors import (
    CommandRejected,
    ConflictError,
    InsufficientDataError,
    NotFoundError,
    ValidationError,
)
from autobas.messages import (
    ActuatorCommand,
    PointEntry,
    Provenance,
    Quality,
    SensorMessage,
    Source,
    StateVector,
)
from autobas.states import BuildingMode, Stimulus

__version__ = "0.1.0"

__all__ = [
    "ActuatorCommand",
    "BuildingMode",
    "CommandRejected",
    "ConflictError",
    "InsufficientDataError",
    "NotFoundError",
    "PointEntry",
    "Provenance",
    "Quality",
    "SensorMessage",
    "Source",
    "StateVector",
    "Stimulus",
    "ValidationError",
    "__version__",
]
