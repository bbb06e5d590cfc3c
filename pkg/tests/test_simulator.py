"""Simulator physics, telemetry semantics, and injection behavior."""

from __future__ import annotations

import copy
import math

import numpy as np
import pytest

from autobas.errors import CommandRejected
from autobas.messages import ActuatorCommand, Quality
from autobas.simulator import (
    CovTracker,
    SimWorld,
    reference_config,
)
from autobas.simulator.config import ScenarioEvent, ScenarioScript
from conftest import single_zone_config


# --------------------------------------------------------------------------
# zone thermal step
# --------------------------------------------------------------------------

def test_single_zone_step_matches_hand_calculation():
    # T' = T + (dt/C) * (U * (T_out - T)): 20 + (600/1e6) * (100 * 10) = 20.6
    cfg = single_zone_config(
        capacitance=1e6,
        conductance=100.0,
        initial_temp=20.0,
        outdoor_const=30.0,
        tick_seconds=600,
    )
    world = SimWorld(cfg)
    world.step()
    expected = 20.0 + (600.0 / 1e6) * (100.0 * (30.0 - 20.0))
    assert math.isclose(float(world.zone_temps[0]), expected, rel_tol=1e-12)
    assert math.isclose(expected, 20.6, rel_tol=1e-12)


def test_zone_approaches_outdoor_temperature_without_hvac():
    cfg = single_zone_config(initial_temp=20.0, outdoor_const=30.0)
    world = SimWorld(cfg)
    for _ in range(200):
        world.step()
    assert abs(float(world.zone_temps[0]) - 30.0) < 0.1


def test_closed_loop_converges_into_comfort_band():
    # constant boundary conditions, controller active, hot start
    cfg = single_zone_config(
        capacitance=2e7,
        conductance=25.0,
        initial_temp=30.0,
        outdoor_const=32.0,
        tick_seconds=60,
        gain_w=2500.0,
        kp=5000.0,
    )
    world = SimWorld(cfg)
    for _ in range(600):
        world.step()
    t = float(world.zone_temps[0])
    assert cfg.comfort_lo_c <= t <= cfg.comfort_hi_c
    assert abs(t - cfg.cooling_setpoint_c) < 1.0


# --------------------------------------------------------------------------
# change-of-value emission
# --------------------------------------------------------------------------

def test_cov_tracker_emits_only_on_threshold_crossings():
    tracker = CovTracker(0.5)
    assert tracker.offer(20.0)  # first value always emits
    assert not tracker.offer(20.3)  # moved 0.3 < 0.5
    assert tracker.offer(20.6)  # moved 0.6 from last emitted 20.0
    assert tracker.last_emitted == 20.6


def test_cov_suppression_end_to_end():
    cfg = single_zone_config(outdoor_const=20.0, initial_temp=20.0)
    world = SimWorld(cfg)
    first = world.step()
    assert len(first.messages) == 1  # initial report
    quiet = world.step()
    assert quiet.messages == []  # temperature static, nothing to say


def test_every_point_reports_on_first_tick(reference_world):
    result = reference_world.step()
    assert len(result.messages) == 50
    assert len({m.point_id for m in result.messages}) == 50


def test_per_point_streams_strictly_ordered(reference_world):
    seen: dict[str, tuple[int, int]] = {}
    for _ in range(400):
        result = reference_world.step()
        for msg in result.messages:
            if msg.point_id in seen:
                prev_seq, prev_ts = seen[msg.point_id]
                assert msg.seq_no == prev_seq + 1
                assert msg.ts > prev_ts
            else:
                assert msg.seq_no == 1
            seen[msg.point_id] = (msg.seq_no, msg.ts)


def test_identical_seeds_give_identical_message_streams():
    def run():
        world = SimWorld(reference_config(noise=True, seed=77))
        out = []
        for _ in range(200):
            out.extend(world.step().messages)
        return [(m.point_id, m.seq_no, m.ts, m.value, m.quality) for m in out]

    assert run() == run()


# --------------------------------------------------------------------------
# energy accounting
# --------------------------------------------------------------------------

def test_meter_reports_exact_sum_of_component_powers(reference_world):
    total_meter = 0.0
    total_components = 0.0
    for _ in range(500):
        reference_world.step()
        total_meter += reference_world.truth["main_power_kw"]
        total_components += sum(reference_world.component_powers.values())
    assert total_meter == pytest.approx(total_components, rel=1e-6)


# --------------------------------------------------------------------------
# scenario injections
# --------------------------------------------------------------------------

def test_sensor_bias_pushes_reading_out_of_operating_range(reference_world):
    w = reference_world
    for _ in range(10):
        w.step()
    assert w.truth["chiller_supply_temp"] == pytest.approx(7.0)
    w.inject(
        ScenarioEvent(
            tick=w.tick_index,
            kind="FaultInjection",
            target="chiller_supply_temp",
            params={"bias": 10.0},
        )
    )
    result = w.step()
    reading = next(m for m in result.messages if m.point_id == "chiller_supply_temp")
    assert reading.value == pytest.approx(17.0)
    assert reading.value > 15.0  # manufacturer high limit


def test_stuck_sensor_freezes_reading(reference_world):
    w = reference_world
    w.step()
    w.inject(
        ScenarioEvent(
            tick=w.tick_index,
            kind="FaultInjection",
            target="zone_01_temp",
            params={"stuck": 30.0},
        )
    )
    res = w.step()
    msg = next(m for m in res.messages if m.point_id == "zone_01_temp")
    assert msg.value == 30.0


def test_efficiency_drift_raises_power_but_stays_in_range(reference_world):
    w = reference_world
    for _ in range(100):
        w.step()
    pre = w.truth["chiller_power_kw"]
    w.inject(
        ScenarioEvent(
            tick=w.tick_index,
            kind="DriftInjection",
            target="chiller",
            params={"coefficient": "cop_linear", "factor": 0.58},
        )
    )
    w.step()
    post = w.truth["chiller_power_kw"]
    spec = w.config.point_index()["chiller_power_kw"][1]
    assert 1.2 <= post / pre <= 1.3
    assert spec.range_lo <= post <= spec.range_hi


def test_repair_restores_nominal_readings(reference_world):
    w = reference_world
    w.step()
    w.inject(
        ScenarioEvent(
            tick=w.tick_index,
            kind="FaultInjection",
            target="chiller_supply_temp",
            params={"bias": 10.0},
        )
    )
    w.step()
    w.inject(ScenarioEvent(tick=w.tick_index, kind="Repair", target="chiller_supply_temp"))
    res = w.step()
    msg = next(m for m in res.messages if m.point_id == "chiller_supply_temp")
    spec = w.config.point_index()["chiller_supply_temp"][1]
    assert abs(msg.value - 7.0) <= spec.cov_threshold


def test_repair_without_active_injection_is_a_noop(reference_world, caplog):
    w = reference_world
    w.step()
    with caplog.at_level("WARNING"):
        record = w.inject(
            ScenarioEvent(tick=w.tick_index, kind="Repair", target="chiller_supply_temp")
        )
    assert record.get("noop") is True
    assert any("matches no active injection" in r.message for r in caplog.records)


def test_outage_marks_mains_powered_readings_suspect(reference_world):
    w = reference_world
    w.step()
    w.inject(
        ScenarioEvent(
            tick=w.tick_index,
            kind="FaultInjection",
            target="power",
            params={"outage": True},
        )
    )
    res = w.step()
    assert w.truth["mains_voltage_v"] == 0.0
    by_point = {m.point_id: m for m in res.messages}
    # powers collapse to zero and report as suspect (zone temps barely move)
    assert by_point["chiller_power_kw"].quality is Quality.SUSPECT
    assert by_point["chiller_power_kw"].value == 0.0
    # the battery-backed voltage sensor stays good and reports the outage
    assert by_point["mains_voltage_v"].quality is Quality.GOOD
    assert by_point["mains_voltage_v"].value == 0.0


def test_generator_restores_power_and_covers_load(reference_world):
    w = reference_world
    w.step()
    w.inject(
        ScenarioEvent(
            tick=w.tick_index,
            kind="FaultInjection",
            target="power",
            params={"outage": True},
        )
    )
    w.step()
    w.step([ActuatorCommand(target="backup_generator", verb="start")])
    assert w.generator_running
    assert w.truth["gen_power_kw"] == pytest.approx(w.truth["main_power_kw"])
    assert w.truth["chiller_power_kw"] > 0.0


# --------------------------------------------------------------------------
# actuator commands
# --------------------------------------------------------------------------

def test_setpoint_command_applies_and_reflects_in_telemetry(reference_world):
    w = reference_world
    w.step([ActuatorCommand(target="chiller_setpoint_c", verb="set", value=9.0)])
    assert w.truth["chiller_setpoint_c"] == 9.0
    assert w.truth["chiller_supply_temp"] == 9.0


def test_unknown_actuator_rejected_world_unchanged(reference_world):
    w = reference_world
    w.step()
    before = copy.deepcopy(w.actuator_state())
    res = w.step([ActuatorCommand(target="nonexistent", verb="set", value=1.0)])
    assert len(res.rejected_commands) == 1
    assert w.actuator_state() == before


def test_out_of_range_setpoint_rejected(reference_world):
    w = reference_world
    res = w.step([ActuatorCommand(target="chiller_setpoint_c", verb="set", value=99.0)])
    assert len(res.rejected_commands) == 1
    assert w.chiller_setpoint == w.config.chiller.default_setpoint_c


def test_generator_accepts_exactly_start_and_stop(reference_world):
    w = reference_world
    with pytest.raises(CommandRejected):
        w.apply_command(ActuatorCommand(target="backup_generator", verb="set", value=1.0))
    w.apply_command(ActuatorCommand(target="backup_generator", verb="start"))
    assert w.generator_running
    w.apply_command(ActuatorCommand(target="backup_generator", verb="stop"))
    assert not w.generator_running


# --------------------------------------------------------------------------
# reference building shape
# --------------------------------------------------------------------------

def test_reference_building_has_fifty_live_points():
    cfg = reference_config()
    assert len(cfg.live_points()) == 50
    registry_only = [d for d in cfg.devices if d.registry_only]
    assert {d.device_id for d in registry_only} == {"elevator_1", "security_1"}
    assert all(not d.points for d in registry_only)


def test_scenario_round_trip_and_validation():
    script = ScenarioScript(
        name="x",
        events=[ScenarioEvent(tick=5, kind="FaultInjection", target="p", params={"bias": 1.0})],
    )
    script.validate()
    again = ScenarioScript.from_dict(script.to_dict())
    assert again.events == script.events
    from autobas.errors import ValidationError

    with pytest.raises(ValidationError):
        ScenarioScript.from_dict(
            {"name": "bad", "events": [{"tick": -1, "kind": "Nope", "target": ""}]}
        )


def test_twin_clone_is_detached(reference_world):
    w = reference_world
    for _ in range(5):
        w.step()
    twin = w.clone_for_twin()
    twin.step([ActuatorCommand(target="chiller_setpoint_c", verb="set", value=12.0)])
    for _ in range(10):
        twin.step(emit=False)
    assert w.chiller_setpoint == w.config.chiller.default_setpoint_c
    assert twin.chiller_setpoint == 12.0
    assert twin.tick_index != w.tick_index
