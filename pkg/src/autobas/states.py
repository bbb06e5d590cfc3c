"""Building operating modes and the stimuli that move between them.

Kept dependency-free so every layer (state machine, interfacing, runtime,
API) can share the enums without import cycles.
"""

from __future__ import annotations

import enum


class BuildingMode(str, enum.Enum):
    INITIALIZING = "Initializing"
    OPTIMIZING = "Optimizing"
    DETECTING_CHANGE = "DetectingChange"
    INTERFACING = "Interfacing"


class Stimulus(str, enum.Enum):
    COMMISSIONING_COMPLETE = "CommissioningComplete"
    OPTIMUM_FOUND = "OptimumFound"
    DRIFT_DETECTED = "DriftDetected"
    FAULT_DETECTED = "FaultDetected"
    FAULT_RESOLVED_NO_EQUIP_CHANGE = "FaultResolvedNoEquipChange"
    EQUIPMENT_CHANGED = "EquipmentChanged"
    UPGRADE_COMPLETE = "UpgradeComplete"
