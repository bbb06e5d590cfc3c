"""Discrete-time building world.

Zone thermal model (explicit Euler, one step per tick):

    T' = T + (dt / C) * (U * (T_out - T) + gains - cooling + heating)

with C the lumped zone capacitance (J/K), U the envelope conductance (W/K),
gains internal + solar heat (W), and cooling/heating the HVAC flows (W).
Cooling per zone is a proportional controller capped by the deliverable coil
power UA_coil * (T - T_chw) and by the chiller capacity. Chiller electrical
power is thermal load divided by COP(T_chw) plus an auxiliary draw; the
building meter reads the exact sum of the component electrical powers.

Telemetry is change-of-value: a point emits only when the reading moved at
least its cov_threshold since the last emitted value, with a strictly
increasing per-point seq_no. Scenario scripts inject sensor faults (bias,
stuck), a mains outage, and efficiency drift; Repair events reverse them.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from autobas.errors import CommandRejected
from autobas.messages import ActuatorCommand, Quality, SensorMessage, Source
from autobas.simulator.config import ScenarioEvent, ScenarioScript, SimConfig

logger = logging.getLogger(__name__)

W_TO_KW = 1e-3
MIN_COP = 0.3  # numerical floor; a drifted curve must never divide by zero

DRIFT_COEFFS = ("cop_base", "cop_linear", "cop_quad")


class CovTracker:
    """Change-of-value gate: emit when the reading moved >= threshold."""

    def __init__(self, threshold: float):
        self.threshold = threshold
        self.last_emitted: float | None = None

    def offer(self, value: float) -> bool:
        if self.last_emitted is None or abs(value - self.last_emitted) >= self.threshold:
            self.last_emitted = value
            return True
        return False


@dataclass
class _PointRuntime:
    seq_no: int = 0
    tracker: CovTracker = field(default_factory=lambda: CovTracker(0.0))


@dataclass(frozen=True)
class StepResult:
    tick: int
    ts: int
    messages: list[SensorMessage]
    rejected_commands: list[tuple[ActuatorCommand, str]]
    applied_events: list[dict]


class SimWorld:
    """Mutable simulation state; step() advances one tick."""

    def __init__(self, config: SimConfig, scenario: ScenarioScript | None = None):
        config.validate()
        self.config = config
        self.scenario = scenario or ScenarioScript()
        self.tick_index = 0

        self.zone_temps = np.array(
            [z.initial_temp_c for z in config.zones], dtype=float
        )
        self._zone_caps = np.array(
            [z.capacitance_j_per_k for z in config.zones], dtype=float
        )
        self._zone_cond = np.array(
            [z.conductance_w_per_k for z in config.zones], dtype=float
        )
        self._zone_base_gain = np.array(
            [z.base_gain_w for z in config.zones], dtype=float
        )
        self._zone_occ_gain = np.array(
            [z.occupied_extra_w for z in config.zones], dtype=float
        )
        self._zone_solar_share = np.array(
            [z.solar_share for z in config.zones], dtype=float
        )

        self.chiller_setpoint = config.chiller.default_setpoint_c
        self.boiler_setpoint = config.boiler.default_setpoint_c
        self.shade_position = 0.0
        self.generator_running = False
        self.mains_out = False
        self.comfort_lo_c = config.comfort_lo_c
        self.comfort_hi_c = config.comfort_hi_c

        self.active_injections: list[dict] = []
        self._drift_factors: dict[str, float] = {c: 1.0 for c in DRIFT_COEFFS}

        self._live = config.live_points()
        self._points = {pt.point_id: _PointRuntime() for _, pt in self._live}
        for _, pt in self._live:
            self._points[pt.point_id].tracker = CovTracker(pt.cov_threshold)
        self._zone_row = {z.zone_id: i for i, z in enumerate(config.zones)}

        self._rng = np.random.default_rng(config.noise_seed)
        self._noise_sigmas = np.array(
            [pt.noise_sigma for _, pt in self._live], dtype=float
        )

        self.truth: dict[str, float] = {}
        self.component_powers: dict[str, float] = {}
        self.last_step: StepResult | None = None

    # ------------------------------------------------------------------
    # equipment curves and boundary conditions
    # ------------------------------------------------------------------

    def cop_at(self, setpoint_c: float) -> float:
        ch = self.config.chiller
        c0 = ch.cop_c0 * self._drift_factors["cop_base"]
        c1 = ch.cop_c1 * self._drift_factors["cop_linear"]
        c2 = ch.cop_c2 * self._drift_factors["cop_quad"]
        return max(MIN_COP, c0 + c1 * setpoint_c + c2 * setpoint_c * setpoint_c)

    def hour_of_day(self, tick: int | None = None) -> float:
        t = self.tick_index if tick is None else tick
        return (t * self.config.tick_seconds / 3600.0) % 24.0

    def outdoor_temp(self, hour: float) -> float:
        od = self.config.outdoor
        phase = 2.0 * math.pi * (hour - (od.peak_hour - 6.0)) / 24.0
        return od.mean_c + od.amplitude_c * math.sin(phase)

    def solar_gain_w(self, hour: float) -> float:
        s = self.config.solar
        if not (s.start_hour <= hour < s.end_hour):
            return 0.0
        span = s.end_hour - s.start_hour
        return s.peak_w * math.sin(math.pi * (hour - s.start_hour) / span)

    def is_occupied(self, hour: float) -> bool:
        return self.config.occupied_start_hour <= hour < self.config.occupied_end_hour

    def power_available(self) -> bool:
        return (not self.mains_out) or self.generator_running

    # ------------------------------------------------------------------
    # injections
    # ------------------------------------------------------------------

    def inject(self, event: ScenarioEvent) -> dict:
        """Apply one scenario event; returns a journal-friendly record."""

        record = {
            "tick": self.tick_index,
            "kind": event.kind,
            "target": event.target,
            "params": dict(event.params),
        }
        if event.kind == "Repair":
            removed = [
                inj for inj in self.active_injections if inj["target"] == event.target
            ]
            if not removed:
                logger.warning(
                    "repair for %r at tick %d matches no active injection",
                    event.target,
                    self.tick_index,
                )
                record["noop"] = True
                return record
            for inj in removed:
                self.active_injections.remove(inj)
                self._unapply(inj)
            record["repaired"] = len(removed)
            return record

        if event.kind == "FaultInjection":
            if event.params.get("outage"):
                self.mains_out = True
            elif not (
                "bias" in event.params or "stuck" in event.params
            ):
                raise CommandRejected(
                    f"fault injection on {event.target!r} needs bias, stuck or outage"
                )
        elif event.kind == "DriftInjection":
            coeff = event.params.get("coefficient", "cop_linear")
            if coeff not in DRIFT_COEFFS:
                raise CommandRejected(f"unknown drift coefficient {coeff!r}")
            factor = float(event.params.get("factor", 1.0))
            self._drift_factors[coeff] *= factor
        else:
            raise CommandRejected(f"unknown scenario event kind {event.kind!r}")

        self.active_injections.append(
            {"kind": event.kind, "target": event.target, "params": dict(event.params)}
        )
        return record

    def _unapply(self, inj: dict) -> None:
        if inj["kind"] == "FaultInjection" and inj["params"].get("outage"):
            self.mains_out = False
        elif inj["kind"] == "DriftInjection":
            coeff = inj["params"].get("coefficient", "cop_linear")
            factor = float(inj["params"].get("factor", 1.0))
            if factor != 0.0:
                self._drift_factors[coeff] /= factor

    def _reading_mods(self, point_id: str) -> tuple[float | None, float]:
        """(stuck value or None, additive bias) from active injections."""

        stuck = None
        bias = 0.0
        for inj in self.active_injections:
            if inj["target"] != point_id or inj["kind"] != "FaultInjection":
                continue
            if "stuck" in inj["params"]:
                stuck = float(inj["params"]["stuck"])
            bias += float(inj["params"].get("bias", 0.0))
        return stuck, bias

    # ------------------------------------------------------------------
    # actuator commands
    # ------------------------------------------------------------------

    def actuator_state(self) -> dict[str, float]:
        return {
            "chiller_setpoint_c": self.chiller_setpoint,
            "boiler_setpoint_c": self.boiler_setpoint,
            "shade_position": self.shade_position,
        }

    def apply_command(self, cmd: ActuatorCommand) -> None:
        ch = self.config.chiller
        bo = self.config.boiler
        if cmd.target == "chiller_setpoint_c":
            self._require_set(cmd, ch.setpoint_lo, ch.setpoint_hi)
            self.chiller_setpoint = float(cmd.value)  # type: ignore[arg-type]
        elif cmd.target == "boiler_setpoint_c":
            self._require_set(cmd, bo.setpoint_lo, bo.setpoint_hi)
            self.boiler_setpoint = float(cmd.value)  # type: ignore[arg-type]
        elif cmd.target == "shade_position":
            self._require_set(cmd, 0.0, 1.0)
            self.shade_position = float(cmd.value)  # type: ignore[arg-type]
        elif cmd.target == "backup_generator":
            if cmd.verb == "start":
                self.generator_running = True
            elif cmd.verb == "stop":
                self.generator_running = False
            else:
                raise CommandRejected(
                    f"backup_generator accepts start/stop, got {cmd.verb!r}"
                )
        else:
            raise CommandRejected(f"unknown actuator {cmd.target!r}")

    @staticmethod
    def _require_set(cmd: ActuatorCommand, lo: float, hi: float) -> None:
        if cmd.verb != "set":
            raise CommandRejected(f"{cmd.target} accepts verb 'set', got {cmd.verb!r}")
        if cmd.value is None or not math.isfinite(cmd.value):
            raise CommandRejected(f"{cmd.target}: missing or non-finite value")
        if not (lo <= cmd.value <= hi):
            raise CommandRejected(
                f"{cmd.target}: value {cmd.value} outside [{lo}, {hi}]"
            )

    # ------------------------------------------------------------------
    # the tick
    # ------------------------------------------------------------------

    def step(
        self,
        commands: tuple[ActuatorCommand, ...] | list[ActuatorCommand] = (),
        emit: bool = True,
    ) -> StepResult:
        cfg = self.config
        tick = self.tick_index
        ts = cfg.epoch_ms + tick * cfg.tick_seconds * 1000

        applied_events = []
        for ev in self.scenario.events_at(tick):
            applied_events.append(self.inject(ev))

        rejected: list[tuple[ActuatorCommand, str]] = []
        for cmd in commands:
            try:
                self.apply_command(cmd)
            except CommandRejected as exc:
                logger.warning("command rejected: %s", exc)
                rejected.append((cmd, str(exc)))

        self._advance_physics(tick)

        messages: list[SensorMessage] = []
        if emit:
            messages = self._emit_messages(ts)

        self.tick_index = tick + 1
        result = StepResult(
            tick=tick,
            ts=ts,
            messages=messages,
            rejected_commands=rejected,
            applied_events=applied_events,
        )
        self.last_step = result
        return result

    def _advance_physics(self, tick: int) -> None:
        cfg = self.config
        dt = float(cfg.tick_seconds)
        hour = self.hour_of_day(tick)
        t_out = self.outdoor_temp(hour)
        occupied = self.is_occupied(hour)
        solar_total = self.solar_gain_w(hour) * (1.0 - self.shade_position)
        powered = self.power_available()

        temps = self.zone_temps
        gains = self._zone_base_gain + self._zone_solar_share * solar_total
        if occupied:
            gains = gains + self._zone_occ_gain

        kp = cfg.control_kp_w_per_k
        if powered and kp > 0.0:
            demand = np.clip(kp * (temps - cfg.cooling_setpoint_c), 0.0, None)
            coil_cap = cfg.chiller.coil_ua_w_per_k * np.clip(
                temps - self.chiller_setpoint, 0.0, None
            )
            cooling = np.minimum(demand, coil_cap)
            total = float(cooling.sum())
            if total > cfg.chiller.capacity_w and total > 0.0:
                cooling = cooling * (cfg.chiller.capacity_w / total)
            heat_demand = np.clip(kp * (cfg.heating_setpoint_c - temps), 0.0, None)
            heat_total = float(heat_demand.sum())
            if heat_total > cfg.boiler.capacity_w and heat_total > 0.0:
                heat_demand = heat_demand * (cfg.boiler.capacity_w / heat_total)
            heating = heat_demand
        else:
            cooling = np.zeros_like(temps)
            heating = np.zeros_like(temps)

        conduction = self._zone_cond * (t_out - temps)
        self.zone_temps = temps + (dt / self._zone_caps) * (
            conduction + gains - cooling + heating
        )

        cool_load_w = float(cooling.sum())
        heat_load_w = float(heating.sum())
        cop = self.cop_at(self.chiller_setpoint)

        if powered:
            chiller_kw = cool_load_w / cop * W_TO_KW + cfg.chiller.aux_kw
            boiler_kw = cfg.boiler.standby_kw + (
                cfg.boiler.pump_kw if heat_load_w > 0.0 else 0.0
            )
            if occupied:
                lighting_kw = (
                    cfg.lighting.occupied_kw
                    + cfg.lighting.shade_extra_kw * self.shade_position
                )
            else:
                lighting_kw = cfg.lighting.off_kw
        else:
            chiller_kw = 0.0
            boiler_kw = 0.0
            lighting_kw = 0.0

        main_kw = chiller_kw + boiler_kw + lighting_kw
        if self.generator_running:
            gen_kw = main_kw if self.mains_out else 2.0
        else:
            gen_kw = 0.0

        load_frac = cool_load_w / cfg.chiller.capacity_w
        role_values = {
            "chiller_supply": self.chiller_setpoint,
            "chiller_return": self.chiller_setpoint + 5.0 * load_frac,
            "chiller_power": chiller_kw,
            "chiller_setpoint": self.chiller_setpoint,
            "boiler_supply": self.boiler_setpoint,
            "boiler_power": boiler_kw,
            "boiler_setpoint": self.boiler_setpoint,
            "shade_position": self.shade_position,
            "mains_voltage": 0.0 if self.mains_out else 230.0,
            "main_power": main_kw,
            "gen_running": 1.0 if self.generator_running else 0.0,
            "gen_power": gen_kw,
            "lighting_power": lighting_kw,
        }
        truth = {}
        for _, pt in self._live:
            if pt.role == "zone_temp":
                zid = pt.point_id[: -len("_temp")]
                truth[pt.point_id] = float(self.zone_temps[self._zone_row[zid]])
            elif pt.role in role_values:
                truth[pt.point_id] = float(role_values[pt.role])

        self.truth = truth
        self.component_powers = {
            "chiller_power": chiller_kw,
            "boiler_power": boiler_kw,
            "lighting_power": lighting_kw,
        }

    def _emit_messages(self, ts: int) -> list[SensorMessage]:
        suspect_mains = self.mains_out and not self.generator_running
        noise = None
        if self.config.noise_enabled:
            noise = self._rng.standard_normal(len(self._live)) * self._noise_sigmas

        messages = []
        for idx, (dev, pt) in enumerate(self._live):
            if pt.point_id not in self.truth:
                continue  # roles not modeled under this config
            reading = self.truth[pt.point_id]
            stuck, bias = self._reading_mods(pt.point_id)
            if stuck is not None:
                reading = stuck
            else:
                reading += bias
                if noise is not None and pt.noise_sigma > 0.0:
                    reading += float(noise[idx])
            if pt.clamp_lo is not None:
                reading = max(pt.clamp_lo, reading)
            if pt.clamp_hi is not None:
                reading = min(pt.clamp_hi, reading)

            quality = (
                Quality.SUSPECT
                if suspect_mains and dev.powered_by == "mains"
                else Quality.GOOD
            )
            runtime = self._points[pt.point_id]
            if runtime.tracker.offer(reading):
                runtime.seq_no += 1
                messages.append(
                    SensorMessage(
                        device_id=dev.device_id,
                        point_id=pt.point_id,
                        seq_no=runtime.seq_no,
                        ts=ts,
                        value=reading,
                        unit=pt.unit,
                        quality=quality,
                        source=Source.NATIVE,
                    )
                )
        return messages

    # ------------------------------------------------------------------
    # digital twin support
    # ------------------------------------------------------------------

    def clone_for_twin(self) -> SimWorld:
        """Deep copy for what-if evaluation: same physics and active
        injections, detached from scripted scenario and telemetry."""

        twin = copy.deepcopy(self)
        twin.scenario = ScenarioScript(name="twin")
        return twin

    def zones_in_band(self) -> np.ndarray:
        return (self.zone_temps >= self.comfort_lo_c) & (
            self.zone_temps <= self.comfort_hi_c
        )
