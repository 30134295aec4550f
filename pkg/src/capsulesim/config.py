"""Declarative YAML configuration for simulator runs and sessions.

One file describes a complete setup: capsule mechanics, magnet, coil
geometry, the default drive command, integrator settings, and service
settings.  Keys carry their unit as a suffix (``_m``, ``_kg``, ``_hz``,
``_s``, ``_a``, ``_deg``); dimensionless entries are bare.  Any key may be
omitted and falls back to the calibrated default.

Example (all values shown are the defaults)::

    capsule:
      body_mass_kg: 4.46e-3
      stroke_m: 2.4e-3
      bearing_friction: 0.097
      ground_friction_static: 0.20
      ground_friction_kinetic: 0.15
      restitution: 0.4
      max_tilt_deg: 22.0
    magnet:
      diameter_m: 4.0e-3
      length_m: 10.0e-3
      mass_kg: 0.92e-3
      magnetization_a_per_m: 8.38e5
    coils:
      semi_major_m: 4.5e-3
      semi_minor_m: 3.0e-3
      turns: 50
      current_a: 0.5
      segments: 256
      clearance_m: 1.3e-3
    drive:
      method: four_coil        # one_coil | four_coil
      frequency_hz: 30.0
      duty: 0.6
      direction: FR            # FR | BL | FL | BR
      current_a: 0.5
      repel_level: 1.0
    sim:
      dt_s: 2.0e-5
      output_rate_hz: 1000.0
      force_table_samples: 1025
    service:
      telemetry_rate_hz: 30.0
      speed_window_s: 2.0
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .actuation import DriveCommand, DriveDirection, DriveMethod
from .assembly import AssemblyParams
from .dynamics import DT_MAX, CapsuleModel, CapsuleParams
from .magnetics import MagnetSpec


class ConfigError(ValueError):
    """A configuration entry failed validation; names the offending field."""

    def __init__(self, field_name: str, message: str) -> None:
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class SimSettings:
    """Integrator and recording settings."""

    dt: float = DT_MAX
    output_rate: float = 1000.0
    force_table_samples: int = 1025


@dataclass(frozen=True)
class ServiceSettings:
    """Interactive session settings."""

    telemetry_rate: float = 30.0
    speed_window: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 < self.telemetry_rate <= 120.0:
            raise ConfigError(
                "service.telemetry_rate_hz",
                f"must be in (0, 120], got {self.telemetry_rate}",
            )
        if self.speed_window <= 0.0:
            raise ConfigError("service.speed_window_s", "must be > 0")


@dataclass(frozen=True)
class SimConfig:
    """Complete simulator configuration."""

    capsule: CapsuleParams = field(default_factory=CapsuleParams)
    coils: AssemblyParams = field(default_factory=AssemblyParams)
    drive: DriveCommand = field(default_factory=DriveCommand)
    sim: SimSettings = field(default_factory=SimSettings)
    service: ServiceSettings = field(default_factory=ServiceSettings)

    def build_model(self) -> CapsuleModel:
        return CapsuleModel(
            self.capsule,
            self.coils,
            dt=self.sim.dt,
            output_rate=self.sim.output_rate,
            table_samples=self.sim.force_table_samples,
        )


def default_config() -> SimConfig:
    """The calibrated default configuration (prototype parameters)."""
    return SimConfig()


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _number(section: Mapping[str, Any], section_name: str, key: str, default: float) -> float:
    value = section.get(key, default)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{section_name}.{key}", f"expected a number, got {value!r}")
    return float(value)


def _integer(section: Mapping[str, Any], section_name: str, key: str, default: int) -> int:
    value = section.get(key, default)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{section_name}.{key}", f"expected an integer, got {value!r}")
    return value


def _section(data: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = data.get(name, {})
    if section is None:
        return {}
    if not isinstance(section, Mapping):
        raise ConfigError(name, f"expected a mapping, got {section!r}")
    return section


_KNOWN_SECTIONS = ("capsule", "magnet", "coils", "drive", "sim", "service")


def config_from_dict(data: Mapping[str, Any] | None) -> SimConfig:
    """Build a SimConfig from a nested dict, validating every entry.

    Raises:
        ConfigError: Any invalid entry; the message names the field.
    """
    data = data or {}
    if not isinstance(data, Mapping):
        raise ConfigError("<root>", f"expected a mapping, got {type(data).__name__}")
    for key in data:
        if key not in _KNOWN_SECTIONS:
            raise ConfigError(key, "unknown configuration section")

    mag = _section(data, "magnet")
    try:
        magnet = MagnetSpec(
            diameter=_number(mag, "magnet", "diameter_m", 4e-3),
            length=_number(mag, "magnet", "length_m", 10e-3),
            mass=_number(mag, "magnet", "mass_kg", 0.92e-3),
            magnetization=_number(mag, "magnet", "magnetization_a_per_m", 8.38e5),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("magnet", str(exc)) from exc

    cap = _section(data, "capsule")
    try:
        capsule = CapsuleParams(
            body_mass=_number(cap, "capsule", "body_mass_kg", 4.46e-3),
            magnet=magnet,
            stroke=_number(cap, "capsule", "stroke_m", 2.4e-3),
            bearing_mu=_number(cap, "capsule", "bearing_friction", 0.097),
            ground_mu_static=_number(cap, "capsule", "ground_friction_static", 0.20),
            ground_mu_kinetic=_number(cap, "capsule", "ground_friction_kinetic", 0.15),
            restitution=_number(cap, "capsule", "restitution", 0.4),
            tilt=math.radians(_number(cap, "capsule", "max_tilt_deg", 22.0)),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("capsule", str(exc)) from exc

    coil = _section(data, "coils")
    try:
        coils = AssemblyParams(
            semi_major=_number(coil, "coils", "semi_major_m", 4.5e-3),
            semi_minor=_number(coil, "coils", "semi_minor_m", 3.0e-3),
            turns=_integer(coil, "coils", "turns", 50),
            current_amplitude=_number(coil, "coils", "current_a", 0.5),
            n_segments=_integer(coil, "coils", "segments", 256),
            stroke=capsule.stroke,
            magnet_length=magnet.length,
            clearance=_number(coil, "coils", "clearance_m", 1.3e-3),
            max_tilt=capsule.tilt,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("coils", str(exc)) from exc

    drive = _section(data, "drive")
    drv = drive_command_from_dict(drive, section_name="drive")

    sim = _section(data, "sim")
    dt = _number(sim, "sim", "dt_s", DT_MAX)
    if not 0.0 < dt <= DT_MAX:
        raise ConfigError("sim.dt_s", f"must be in (0, {DT_MAX}], got {dt}")
    output_rate = _number(sim, "sim", "output_rate_hz", 1000.0)
    if output_rate <= 0.0:
        raise ConfigError("sim.output_rate_hz", "must be > 0")
    samples = _integer(sim, "sim", "force_table_samples", 1025)
    if samples < 16:
        raise ConfigError("sim.force_table_samples", f"must be >= 16, got {samples}")
    settings = SimSettings(dt=dt, output_rate=output_rate, force_table_samples=samples)

    svc = _section(data, "service")
    service = ServiceSettings(
        telemetry_rate=_number(svc, "service", "telemetry_rate_hz", 30.0),
        speed_window=_number(svc, "service", "speed_window_s", 2.0),
    )

    return SimConfig(
        capsule=capsule, coils=coils, drive=drv, sim=settings, service=service
    )


def drive_command_from_dict(
    data: Mapping[str, Any], *, section_name: str = "drive", base: DriveCommand | None = None
) -> DriveCommand:
    """Parse a drive command mapping (partial entries fall back to ``base``)."""
    base = base or DriveCommand()
    method_raw = data.get("method", base.method.value)
    try:
        method = DriveMethod(method_raw)
    except ValueError:
        raise ConfigError(
            f"{section_name}.method",
            f"must be one of {[m.value for m in DriveMethod]}, got {method_raw!r}",
        ) from None
    direction_raw = data.get("direction", base.direction.value)
    try:
        direction = DriveDirection(direction_raw)
    except ValueError:
        raise ConfigError(
            f"{section_name}.direction",
            f"must be one of {[d.value for d in DriveDirection]}, got {direction_raw!r}",
        ) from None
    frequency = _number(data, section_name, "frequency_hz", base.frequency)
    duty = _number(data, section_name, "duty", base.duty)
    current = _number(data, section_name, "current_a", base.current_amplitude)
    repel = _number(data, section_name, "repel_level", base.repel_level)
    try:
        return DriveCommand(
            method=method,
            frequency=frequency,
            duty=duty,
            current_amplitude=current,
            direction=direction,
            repel_level=repel,
        )
    except ValueError as exc:
        text = str(exc)
        for name in ("duty", "frequency", "current_amplitude", "repel_level"):
            if name in text:
                key = {"current_amplitude": "current_a", "frequency": "frequency_hz"}.get(
                    name, name
                )
                raise ConfigError(f"{section_name}.{key}", text) from exc
        raise ConfigError(section_name, text) from exc


def config_to_dict(config: SimConfig) -> dict[str, Any]:
    """Serialise a SimConfig to the nested-dict form used by the YAML files."""
    return {
        "capsule": {
            "body_mass_kg": config.capsule.body_mass,
            "stroke_m": config.capsule.stroke,
            "bearing_friction": config.capsule.bearing_mu,
            "ground_friction_static": config.capsule.ground_mu_static,
            "ground_friction_kinetic": config.capsule.ground_mu_kinetic,
            "restitution": config.capsule.restitution,
            "max_tilt_deg": math.degrees(config.capsule.tilt),
        },
        "magnet": {
            "diameter_m": config.capsule.magnet.diameter,
            "length_m": config.capsule.magnet.length,
            "mass_kg": config.capsule.magnet.mass,
            "magnetization_a_per_m": config.capsule.magnet.magnetization,
        },
        "coils": {
            "semi_major_m": config.coils.semi_major,
            "semi_minor_m": config.coils.semi_minor,
            "turns": config.coils.turns,
            "current_a": config.coils.current_amplitude,
            "segments": config.coils.n_segments,
            "clearance_m": config.coils.clearance,
        },
        "drive": {
            "method": config.drive.method.value,
            "frequency_hz": config.drive.frequency,
            "duty": config.drive.duty,
            "direction": config.drive.direction.value,
            "current_a": config.drive.current_amplitude,
            "repel_level": config.drive.repel_level,
        },
        "sim": {
            "dt_s": config.sim.dt,
            "output_rate_hz": config.sim.output_rate,
            "force_table_samples": config.sim.force_table_samples,
        },
        "service": {
            "telemetry_rate_hz": config.service.telemetry_rate,
            "speed_window_s": config.service.speed_window,
        },
    }


def load_config(path: str | Path) -> SimConfig:
    """Load a YAML configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data)


def save_config(config: SimConfig, path: str | Path) -> None:
    """Write a configuration to YAML."""
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=False)
