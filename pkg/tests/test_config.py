"""Tests for YAML configuration loading and validation."""

from __future__ import annotations

import math
from pathlib import Path

import pytest

from capsulesim import (
    ConfigError,
    DriveDirection,
    DriveMethod,
    config_from_dict,
    default_config,
    load_config,
    save_config,
)
from capsulesim.config import config_to_dict

CALIBRATED = Path(__file__).resolve().parents[1] / "configs" / "calibrated.yaml"


class TestDefaults:
    def test_defaults_echo_prototype_values(self):
        cfg = default_config()
        assert cfg.capsule.magnet.diameter == 4e-3
        assert cfg.capsule.magnet.length == 10e-3
        assert cfg.capsule.magnet.mass == 0.92e-3
        assert cfg.capsule.magnet.magnetization == 8.38e5
        assert cfg.capsule.stroke == 2.4e-3
        assert cfg.capsule.bearing_mu == 0.097
        assert cfg.capsule.body_mass == pytest.approx(5.38e-3 - 0.92e-3)
        assert cfg.coils.turns == 50
        assert cfg.coils.current_amplitude == 0.5
        assert math.degrees(cfg.capsule.tilt) == pytest.approx(22.0)

    def test_empty_dict_gives_defaults(self):
        assert config_from_dict({}) == default_config()
        assert config_from_dict(None) == default_config()

    def test_committed_calibration_matches_defaults(self):
        cfg = load_config(CALIBRATED)
        assert cfg == default_config()


class TestValidation:
    def test_invalid_duty_names_field(self):
        with pytest.raises(ConfigError, match="drive.duty") as excinfo:
            config_from_dict({"drive": {"duty": 1.5}})
        assert excinfo.value.field == "drive.duty"

    def test_invalid_method_names_field(self):
        with pytest.raises(ConfigError, match="drive.method"):
            config_from_dict({"drive": {"method": "two_coil"}})

    def test_invalid_direction_names_field(self):
        with pytest.raises(ConfigError, match="drive.direction"):
            config_from_dict({"drive": {"direction": "NW"}})

    def test_negative_mass_rejected(self):
        with pytest.raises(ConfigError, match="capsule"):
            config_from_dict({"capsule": {"body_mass_kg": -1.0}})

    def test_non_numeric_rejected(self):
        with pytest.raises(ConfigError, match="capsule.stroke_m"):
            config_from_dict({"capsule": {"stroke_m": "wide"}})

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="boiler"):
            config_from_dict({"boiler": {}})

    def test_oversized_dt_rejected(self):
        with pytest.raises(ConfigError, match="sim.dt_s"):
            config_from_dict({"sim": {"dt_s": 1e-3}})

    def test_telemetry_rate_cap(self):
        with pytest.raises(ConfigError, match="telemetry_rate"):
            config_from_dict({"service": {"telemetry_rate_hz": 500.0}})


class TestRoundTrip:
    def test_yaml_roundtrip(self, tmp_path):
        cfg = config_from_dict(
            {
                "capsule": {"restitution": 0.55, "ground_friction_kinetic": 0.11,
                            "ground_friction_static": 0.18},
                "drive": {"method": "one_coil", "frequency_hz": 12.5,
                          "duty": 0.45, "direction": "BL"},
                "coils": {"turns": 60},
            }
        )
        path = tmp_path / "cfg.yaml"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded == cfg
        assert loaded.drive.method is DriveMethod.ONE_COIL
        assert loaded.drive.direction is DriveDirection.BACKWARD_LEFT
        assert loaded.coils.turns == 60

    def test_dict_roundtrip_covers_all_sections(self):
        cfg = default_config()
        data = config_to_dict(cfg)
        assert set(data) == {"capsule", "magnet", "coils", "drive", "sim", "service"}
        assert config_from_dict(data) == cfg
