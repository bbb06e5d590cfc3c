"""Discrete-time building simulator.

A first-order lumped-capacitance thermal model per zone, simple equipment
power curves, change-of-value telemetry, and scripted fault/drift injection.
"""

from autobas.simulator.config import (
    BoilerSpec,
    ChillerSpec,
    DeviceSpec,
    LightingSpec,
    OutdoorModel,
    PointSpec,
    ScenarioEvent,
    ScenarioScript,
    SimConfig,
    SolarModel,
    ZoneSpec,
    REFERENCE_DRIFT_FACTOR,
    reference_config,
    reference_drift_scenario,
    reference_scenario,
)
from autobas.simulator.world import CovTracker, SimWorld, StepResult

__all__ = [
    "BoilerSpec",
    "ChillerSpec",
    "CovTracker",
    "DeviceSpec",
    "LightingSpec",
    "OutdoorModel",
    "PointSpec",
    "ScenarioEvent",
    "ScenarioScript",
    "SimConfig",
    "SimWorld",
    "SolarModel",
    "StepResult",
    "ZoneSpec",
    "REFERENCE_DRIFT_FACTOR",
    "reference_config",
    "reference_drift_scenario",
    "reference_scenario",
]
