"""Shared test fixtures and config builders."""

from __future__ import annotations

import pytest

from autobas.simulator.config import (
    DeviceSpec,
    OutdoorModel,
    PointSpec,
    SimConfig,
    SolarModel,
    ZoneSpec,
)


def single_zone_config(
    capacitance: float = 1e6,
    conductance: float = 100.0,
    initial_temp: float = 20.0,
    outdoor_const: float = 30.0,
    tick_seconds: int = 600,
    gain_w: float = 0.0,
    kp: float = 0.0,
) -> SimConfig:
    """One bare zone, no HVAC action unless kp > 0, constant outdoor temp."""

    zone = ZoneSpec(
        zone_id="zone_01",
        capacitance_j_per_k=capacitance,
        conductance_w_per_k=conductance,
        initial_temp_c=initial_temp,
        base_gain_w=gain_w,
        occupied_extra_w=0.0,
        solar_share=0.0,
    )
    dev = DeviceSpec(
        device_id="zone_01",
        system="zones",
        clazz="ZoneTempSensor",
        points=(
            PointSpec(
                point_id="zone_01_temp",
                unit="degC",
                role="zone_temp",
                clazz="ZoneTempSensor",
                cov_threshold=0.1,
                range_lo=-20.0,
                range_hi=60.0,
                nominal=initial_temp,
            ),
        ),
    )
    cfg = SimConfig(
        tick_seconds=tick_seconds,
        zones=[zone],
        devices=[dev],
        outdoor=OutdoorModel(mean_c=outdoor_const, amplitude_c=0.0),
        solar=SolarModel(peak_w=0.0),
        control_kp_w_per_k=kp,
    )
    cfg.validate()
    return cfg


@pytest.fixture
def reference_world():
    from autobas.simulator import SimWorld, reference_config

    return SimWorld(reference_config())
