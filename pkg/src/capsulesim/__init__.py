"""Desk-scale simulator for an electromagnetically actuated vibro-impact
capsule robot: coil magnetostatics, square-wave drive schemes, impact and
friction locomotion dynamics, parameter sweeps, and a live steering service.
"""

from .actuation import (
    CoilCurrents,
    DriveCommand,
    DriveDirection,
    DriveMethod,
    TiltGeometry,
    currents_at,
    phase_patterns,
    tilt_axis,
)
from .assembly import AssemblyParams, AxialForceTable, CoilAssembly
from .config import (
    ConfigError,
    SimConfig,
    SimSettings,
    ServiceSettings,
    config_from_dict,
    default_config,
    load_config,
    save_config,
)
from .constants import GRAVITY, MU_0
from .dynamics import (
    CapsuleModel,
    CapsuleParams,
    CapsuleState,
    ImpactSide,
    IntegrationDivergedError,
    MagnetState,
    SimulationValidationError,
    Trajectory,
    average_speed,
    deviation_angle,
    ground_friction,
    resolve_impact,
    simulate,
)
from .geometry import Pose
from .magnetics import (
    Coil,
    CoilSpec,
    FieldSample,
    MagnetSpec,
    SingularityError,
    Wrench,
    discretize_ellipse,
    ellipse_polyline,
    field_at,
    field_gradient,
    field_of_coils,
    sample_field,
    wrench_on_dipole,
)
from .scenarios import (
    SweepPlan,
    SweepResult,
    TrackResult,
    TrackSpec,
    run_sweep,
    run_track,
)
from .service import Session, SessionManager, create_app

__version__ = "0.1.0"

__all__ = [
    "AssemblyParams",
    "AxialForceTable",
    "CapsuleModel",
    "CapsuleParams",
    "CapsuleState",
    "Coil",
    "CoilAssembly",
    "CoilCurrents",
    "CoilSpec",
    "ConfigError",
    "DriveCommand",
    "DriveDirection",
    "DriveMethod",
    "FieldSample",
    "GRAVITY",
    "ImpactSide",
    "IntegrationDivergedError",
    "MU_0",
    "MagnetSpec",
    "MagnetState",
    "Pose",
    "ServiceSettings",
    "Session",
    "SessionManager",
    "SimConfig",
    "SimSettings",
    "SimulationValidationError",
    "SingularityError",
    "SweepPlan",
    "SweepResult",
    "TiltGeometry",
    "TrackResult",
    "TrackSpec",
    "Trajectory",
    "Wrench",
    "average_speed",
    "config_from_dict",
    "create_app",
    "currents_at",
    "default_config",
    "deviation_angle",
    "discretize_ellipse",
    "ellipse_polyline",
    "field_at",
    "field_gradient",
    "field_of_coils",
    "ground_friction",
    "load_config",
    "phase_patterns",
    "resolve_impact",
    "run_sweep",
    "run_track",
    "sample_field",
    "save_config",
    "simulate",
    "tilt_axis",
    "wrench_on_dipole",
]
