"""Building model configuration and scenario scripts.

Everything the simulator needs is plain data with a JSON round trip. The
reference building is generated by :func:`reference_config` and has exactly
50 live points:

    37 zone temperature sensors
     4 chiller points   (supply temp, return temp, electrical power, setpoint)
     3 boiler points    (supply temp, electrical power, setpoint)
     1 shading position
     1 mains voltage
     1 building power meter
     2 generator points (run status, output power)
     1 lighting power meter

plus two registry-only devices (elevator, security system) that never emit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from autobas.errors import ValidationError

EPOCH_MS = 1_767_225_600_000  # 2026-01-01T00:00:00Z, simulated time zero


# --------------------------------------------------------------------------
# point / device table
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PointSpec:
    """One telemetry point.

    role tells the world how to compute the reading; clazz is the true
    classification label used by accuracy tests and the commissioning
    catalog.
    """

    point_id: str
    unit: str
    role: str
    clazz: str
    cov_threshold: float
    range_lo: float
    range_hi: float
    noise_sigma: float = 0.0
    clamp_lo: float | None = None
    clamp_hi: float | None = None
    nominal: float = 0.0


@dataclass(frozen=True)
class DeviceSpec:
    device_id: str
    system: str
    clazz: str
    points: tuple[PointSpec, ...] = ()
    powered_by: str = "mains"  # mains | battery | self
    registry_only: bool = False


@dataclass(frozen=True)
class ZoneSpec:
    zone_id: str
    capacitance_j_per_k: float
    conductance_w_per_k: float
    initial_temp_c: float
    base_gain_w: float
    occupied_extra_w: float
    solar_share: float  # fraction of building solar gain landing in this zone


@dataclass(frozen=True)
class ChillerSpec:
    """Chilled-water plant.

    COP is quadratic in the chilled-water setpoint T (degC):

        COP(T) = cop_c0 + cop_c1 * T + cop_c2 * T^2

    electrical power = thermal_load / COP + aux while running. Efficiency
    drift multiplies one of the curve coefficients.
    """

    capacity_w: float = 250_000.0
    cop_c0: float = 2.8335
    cop_c1: float = 0.30366
    cop_c2: float = -0.01687
    aux_kw: float = 1.0
    default_setpoint_c: float = 7.0
    setpoint_lo: float = 4.0
    setpoint_hi: float = 15.0
    coil_ua_w_per_k: float = 800.0  # per zone deliverable-cooling conductance


@dataclass(frozen=True)
class BoilerSpec:
    capacity_w: float = 150_000.0
    standby_kw: float = 0.4
    pump_kw: float = 1.5
    default_setpoint_c: float = 55.0
    setpoint_lo: float = 30.0
    setpoint_hi: float = 90.0


@dataclass(frozen=True)
class LightingSpec:
    occupied_kw: float = 8.0
    off_kw: float = 0.8
    shade_extra_kw: float = 2.0  # daylight compensation when shades closed


@dataclass(frozen=True)
class OutdoorModel:
    """Sinusoidal outdoor temperature with a 24 h period."""

    mean_c: float = 26.0
    amplitude_c: float = 6.0
    peak_hour: float = 15.0


@dataclass(frozen=True)
class SolarModel:
    """Half-sine solar gain between start_hour and end_hour."""

    peak_w: float = 2000.0
    start_hour: float = 7.0
    end_hour: float = 19.0


# --------------------------------------------------------------------------
# scenario scripts
# --------------------------------------------------------------------------

EVENT_KINDS = ("FaultInjection", "DriftInjection", "Repair")


@dataclass(frozen=True)
class ScenarioEvent:
    tick: int
    kind: str  # FaultInjection | DriftInjection | Repair
    target: str  # point id or system id
    params: dict = field(default_factory=dict)

    def problems(self) -> list[str]:
        out = []
        if self.tick < 0:
            out.append(f"event tick must be >= 0, got {self.tick}")
        if self.kind not in EVENT_KINDS:
            out.append(f"unknown event kind {self.kind!r}")
        if not self.target:
            out.append("event target is empty")
        return out


@dataclass
class ScenarioScript:
    name: str = "empty"
    events: list[ScenarioEvent] = field(default_factory=list)

    def validate(self) -> None:
        problems = []
        for i, ev in enumerate(self.events):
            problems.extend(f"events[{i}]: {p}" for p in ev.problems())
        if problems:
            raise ValidationError("invalid scenario script", problems)
        self.events.sort(key=lambda e: e.tick)

    def events_at(self, tick: int) -> list[ScenarioEvent]:
        return [e for e in self.events if e.tick == tick]

    def to_dict(self) -> dict:
        return {"name": self.name, "events": [asdict(e) for e in self.events]}

    @classmethod
    def from_dict(cls, doc: dict) -> ScenarioScript:
        script = cls(
            name=doc.get("name", "unnamed"),
            events=[
                ScenarioEvent(
                    tick=int(e["tick"]),
                    kind=e["kind"],
                    target=e["target"],
                    params=dict(e.get("params", {})),
                )
                for e in doc.get("events", [])
            ],
        )
        script.validate()
        return script

    @classmethod
    def load(cls, path: str | Path) -> ScenarioScript:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"scenario file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


# --------------------------------------------------------------------------
# top-level config
# --------------------------------------------------------------------------

@dataclass
class SimConfig:
    tick_seconds: int = 60
    epoch_ms: int = EPOCH_MS
    zones: list[ZoneSpec] = field(default_factory=list)
    devices: list[DeviceSpec] = field(default_factory=list)
    chiller: ChillerSpec = field(default_factory=ChillerSpec)
    boiler: BoilerSpec = field(default_factory=BoilerSpec)
    lighting: LightingSpec = field(default_factory=LightingSpec)
    outdoor: OutdoorModel = field(default_factory=OutdoorModel)
    solar: SolarModel = field(default_factory=SolarModel)
    occupied_start_hour: float = 8.0
    occupied_end_hour: float = 18.0
    comfort_lo_c: float = 21.0
    comfort_hi_c: float = 25.0
    cooling_setpoint_c: float = 23.0
    heating_setpoint_c: float = 19.0
    control_kp_w_per_k: float = 5000.0
    noise_enabled: bool = False
    noise_seed: int = 20260101

    # ------------------------------------------------------------------

    def live_points(self) -> list[tuple[DeviceSpec, PointSpec]]:
        out = []
        for dev in self.devices:
            for pt in dev.points:
                out.append((dev, pt))
        return out

    def point_index(self) -> dict[str, tuple[DeviceSpec, PointSpec]]:
        return {pt.point_id: (dev, pt) for dev, pt in self.live_points()}

    def validate(self) -> None:
        problems: list[str] = []
        if self.tick_seconds <= 0:
            problems.append(f"tick_seconds must be positive, got {self.tick_seconds}")
        if self.comfort_lo_c >= self.comfort_hi_c:
            problems.append("comfort band is empty (lo >= hi)")
        seen_points: set[str] = set()
        seen_devices: set[str] = set()
        for dev in self.devices:
            if dev.device_id in seen_devices:
                problems.append(f"duplicate device_id {dev.device_id!r}")
            seen_devices.add(dev.device_id)
            if dev.registry_only and dev.points:
                problems.append(
                    f"registry-only device {dev.device_id!r} must not declare points"
                )
            for pt in dev.points:
                if pt.point_id in seen_points:
                    problems.append(f"duplicate point_id {pt.point_id!r}")
                seen_points.add(pt.point_id)
                if pt.range_lo >= pt.range_hi:
                    problems.append(
                        f"point {pt.point_id!r}: empty operating range "
                        f"[{pt.range_lo}, {pt.range_hi}]"
                    )
                if pt.cov_threshold < 0:
                    problems.append(
                        f"point {pt.point_id!r}: negative cov_threshold"
                    )
        for z in self.zones:
            if z.capacitance_j_per_k <= 0:
                problems.append(f"zone {z.zone_id!r}: capacitance must be positive")
            if z.conductance_w_per_k < 0:
                problems.append(f"zone {z.zone_id!r}: negative conductance")
        zone_point_ids = {
            pt.point_id for dev, pt in self.live_points() if pt.role == "zone_temp"
        }
        for z in self.zones:
            if f"{z.zone_id}_temp" not in zone_point_ids:
                problems.append(f"zone {z.zone_id!r} has no temperature point")
        if problems:
            raise ValidationError("invalid simulator config", problems)

    # ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "tick_seconds": self.tick_seconds,
            "epoch_ms": self.epoch_ms,
            "zones": [asdict(z) for z in self.zones],
            "devices": [asdict(d) for d in self.devices],
            "chiller": asdict(self.chiller),
            "boiler": asdict(self.boiler),
            "lighting": asdict(self.lighting),
            "outdoor": asdict(self.outdoor),
            "solar": asdict(self.solar),
            "occupied_start_hour": self.occupied_start_hour,
            "occupied_end_hour": self.occupied_end_hour,
            "comfort_lo_c": self.comfort_lo_c,
            "comfort_hi_c": self.comfort_hi_c,
            "cooling_setpoint_c": self.cooling_setpoint_c,
            "heating_setpoint_c": self.heating_setpoint_c,
            "control_kp_w_per_k": self.control_kp_w_per_k,
            "noise_enabled": self.noise_enabled,
            "noise_seed": self.noise_seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> SimConfig:
        try:
            cfg = cls(
                tick_seconds=int(doc["tick_seconds"]),
                epoch_ms=int(doc.get("epoch_ms", EPOCH_MS)),
                zones=[ZoneSpec(**z) for z in doc.get("zones", [])],
                devices=[
                    DeviceSpec(
                        device_id=d["device_id"],
                        system=d["system"],
                        clazz=d["clazz"],
                        points=tuple(PointSpec(**p) for p in d.get("points", [])),
                        powered_by=d.get("powered_by", "mains"),
                        registry_only=bool(d.get("registry_only", False)),
                    )
                    for d in doc.get("devices", [])
                ],
                chiller=ChillerSpec(**doc.get("chiller", {})),
                boiler=BoilerSpec(**doc.get("boiler", {})),
                lighting=LightingSpec(**doc.get("lighting", {})),
                outdoor=OutdoorModel(**doc.get("outdoor", {})),
                solar=SolarModel(**doc.get("solar", {})),
                occupied_start_hour=float(doc.get("occupied_start_hour", 8.0)),
                occupied_end_hour=float(doc.get("occupied_end_hour", 18.0)),
                comfort_lo_c=float(doc.get("comfort_lo_c", 21.0)),
                comfort_hi_c=float(doc.get("comfort_hi_c", 25.0)),
                cooling_setpoint_c=float(doc.get("cooling_setpoint_c", 23.0)),
                heating_setpoint_c=float(doc.get("heating_setpoint_c", 19.0)),
                control_kp_w_per_k=float(doc.get("control_kp_w_per_k", 5000.0)),
                noise_enabled=bool(doc.get("noise_enabled", False)),
                noise_seed=int(doc.get("noise_seed", 20260101)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed simulator config: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> SimConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


# --------------------------------------------------------------------------
# reference building
# --------------------------------------------------------------------------

N_REFERENCE_ZONES = 37


def reference_config(noise: bool = False, seed: int = 20260101) -> SimConfig:
    """The 50-point reference building used by integration tests and demos."""

    zones = []
    zone_devices = []
    for i in range(1, N_REFERENCE_ZONES + 1):
        zid = f"zone_{i:02d}"
        zones.append(
            ZoneSpec(
                zone_id=zid,
                capacitance_j_per_k=2.0e7,
                conductance_w_per_k=25.0,
                initial_temp_c=23.5,
                base_gain_w=2500.0,
                occupied_extra_w=100.0,
                solar_share=1.0 / N_REFERENCE_ZONES,
            )
        )
        zone_devices.append(
            DeviceSpec(
                device_id=zid,
                system="zones",
                clazz="ZoneTempSensor",
                points=(
                    PointSpec(
                        point_id=f"{zid}_temp",
                        unit="degC",
                        role="zone_temp",
                        clazz="ZoneTempSensor",
                        cov_threshold=0.1,
                        range_lo=10.0,
                        range_hi=35.0,
                        noise_sigma=0.05,
                        nominal=23.5,
                    ),
                ),
            )
        )

    chiller_dev = DeviceSpec(
        device_id="chiller",
        system="hvac",
        clazz="Chiller",
        points=(
            PointSpec(
                point_id="chiller_supply_temp",
                unit="degC",
                role="chiller_supply",
                clazz="ChilledSupplyTemp",
                cov_threshold=0.1,
                range_lo=4.0,
                range_hi=15.0,
                noise_sigma=0.05,
                nominal=7.0,
            ),
            PointSpec(
                point_id="chiller_return_temp",
                unit="degC",
                role="chiller_return",
                clazz="ChilledReturnTemp",
                cov_threshold=0.1,
                range_lo=4.0,
                range_hi=25.0,
                noise_sigma=0.05,
                nominal=12.0,
            ),
            PointSpec(
                point_id="chiller_power_kw",
                unit="kW",
                role="chiller_power",
                clazz="EquipmentPowerMeter",
                cov_threshold=0.2,
                range_lo=0.0,
                range_hi=200.0,
                noise_sigma=0.3,
                clamp_lo=0.0,
                nominal=24.0,
            ),
            PointSpec(
                point_id="chiller_setpoint_c",
                unit="degC",
                role="chiller_setpoint",
                clazz="ChilledSetpoint",
                cov_threshold=0.01,
                range_lo=4.0,
                range_hi=15.0,
                nominal=7.0,
            ),
        ),
    )
    boiler_dev = DeviceSpec(
        device_id="boiler",
        system="hvac",
        clazz="Boiler",
        points=(
            PointSpec(
                point_id="boiler_supply_temp",
                unit="degC",
                role="boiler_supply",
                clazz="HotSupplyTemp",
                cov_threshold=0.2,
                range_lo=30.0,
                range_hi=90.0,
                noise_sigma=0.1,
                nominal=55.0,
            ),
            PointSpec(
                point_id="boiler_power_kw",
                unit="kW",
                role="boiler_power",
                clazz="EquipmentPowerMeter",
                cov_threshold=0.2,
                range_lo=0.0,
                range_hi=50.0,
                noise_sigma=0.1,
                clamp_lo=0.0,
                nominal=0.4,
            ),
            PointSpec(
                point_id="boiler_setpoint_c",
                unit="degC",
                role="boiler_setpoint",
                clazz="HotSetpoint",
                cov_threshold=0.01,
                range_lo=30.0,
                range_hi=90.0,
                nominal=55.0,
            ),
        ),
    )
    shading_dev = DeviceSpec(
        device_id="shading",
        system="shading",
        clazz="ShadingSystem",
        points=(
            PointSpec(
                point_id="shade_position",
                unit="frac",
                role="shade_position",
                clazz="ShadePosition",
                cov_threshold=0.02,
                range_lo=0.0,
                range_hi=1.0,
                noise_sigma=0.005,
                clamp_lo=0.0,
                clamp_hi=1.0,
                nominal=0.0,
            ),
        ),
    )
    power_dev = DeviceSpec(
        device_id="power_supply",
        system="power",
        clazz="PowerSupply",
        powered_by="battery",
        points=(
            PointSpec(
                point_id="mains_voltage_v",
                unit="V",
                role="mains_voltage",
                clazz="MainsVoltage",
                cov_threshold=0.5,
                range_lo=207.0,
                range_hi=253.0,
                noise_sigma=0.2,
                clamp_lo=0.0,
                nominal=230.0,
            ),
        ),
    )
    meter_dev = DeviceSpec(
        device_id="main_meter",
        system="power",
        clazz="BuildingMeter",
        powered_by="battery",
        points=(
            PointSpec(
                point_id="main_power_kw",
                unit="kW",
                role="main_power",
                clazz="BuildingPowerMeter",
                cov_threshold=0.2,
                range_lo=0.0,
                range_hi=500.0,
                noise_sigma=0.3,
                clamp_lo=0.0,
                nominal=30.0,
            ),
        ),
    )
    generator_dev = DeviceSpec(
        device_id="backup_generator",
        system="power",
        clazz="BackupGenerator",
        powered_by="self",
        points=(
            PointSpec(
                point_id="gen_running",
                unit="bool",
                role="gen_running",
                clazz="RunStatus",
                cov_threshold=0.5,
                range_lo=0.0,
                range_hi=1.0,
                nominal=0.0,
            ),
            PointSpec(
                point_id="gen_power_kw",
                unit="kW",
                role="gen_power",
                clazz="EquipmentPowerMeter",
                cov_threshold=0.2,
                range_lo=0.0,
                range_hi=300.0,
                noise_sigma=0.05,
                clamp_lo=0.0,
                nominal=0.0,
            ),
        ),
    )
    lighting_dev = DeviceSpec(
        device_id="lighting",
        system="lighting",
        clazz="LightingCircuit",
        points=(
            PointSpec(
                point_id="lighting_power_kw",
                unit="kW",
                role="lighting_power",
                clazz="EquipmentPowerMeter",
                cov_threshold=0.2,
                range_lo=0.0,
                range_hi=50.0,
                noise_sigma=0.1,
                clamp_lo=0.0,
                nominal=8.0,
            ),
        ),
    )
    elevator_dev = DeviceSpec(
        device_id="elevator_1",
        system="transport",
        clazz="Elevator",
        registry_only=True,
    )
    security_dev = DeviceSpec(
        device_id="security_1",
        system="security",
        clazz="SecuritySystem",
        registry_only=True,
    )

    cfg = SimConfig(
        zones=zones,
        devices=zone_devices
        + [
            chiller_dev,
            boiler_dev,
            shading_dev,
            power_dev,
            meter_dev,
            generator_dev,
            lighting_dev,
            elevator_dev,
            security_dev,
        ],
        noise_enabled=noise,
        noise_seed=seed,
    )
    cfg.validate()
    return cfg


REFERENCE_DRIFT_FACTOR = 0.58  # on the linear COP coefficient; see drift tests


def reference_drift_scenario(drift_tick: int) -> ScenarioScript:
    """Chiller efficiency degradation: the linear COP coefficient is scaled
    so power at the running setpoint rises sharply but stays in range."""

    script = ScenarioScript(
        name="chiller-efficiency-drift",
        events=[
            ScenarioEvent(
                tick=drift_tick,
                kind="DriftInjection",
                target="chiller",
                params={"coefficient": "cop_linear", "factor": REFERENCE_DRIFT_FACTOR},
            ),
        ],
    )
    script.validate()
    return script


def reference_scenario(fault_tick: int, repair_delta: int = 150) -> ScenarioScript:
    """Paper-style two-fault day: chiller sensor bias at fault_tick, mains
    outage one tick later, repairs staggered with power fixed first."""

    script = ScenarioScript(
        name="two-fault-day",
        events=[
            ScenarioEvent(
                tick=fault_tick,
                kind="FaultInjection",
                target="chiller_supply_temp",
                params={"bias": 10.0},
            ),
            ScenarioEvent(
                tick=fault_tick + 1,
                kind="FaultInjection",
                target="power",
                params={"outage": True},
            ),
            ScenarioEvent(tick=fault_tick + repair_delta, kind="Repair", target="power"),
            ScenarioEvent(
                tick=fault_tick + 2 * repair_delta,
                kind="Repair",
                target="chiller_supply_temp",
            ),
        ],
    )
    script.validate()
    return script
