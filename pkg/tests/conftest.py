"""Shared fixtures.

Model fixtures are session-scoped: a CapsuleModel is immutable configuration
plus cached force tables, and every run owns its own state, so sharing one
across tests is safe and avoids rebuilding the tables.
"""

from __future__ import annotations

import numpy as np
import pytest

from capsulesim import (
    CapsuleModel,
    Coil,
    CoilSpec,
    MagnetSpec,
    default_config,
)


@pytest.fixture(scope="session")
def table_coil() -> Coil:
    """One prototype drive coil (calibrated ellipse, rated current)."""
    return Coil(CoilSpec(semi_major=4.5e-3, semi_minor=3.0e-3, turns=50,
                         current_amplitude=0.5))


@pytest.fixture(scope="session")
def magnet() -> MagnetSpec:
    return MagnetSpec()


@pytest.fixture(scope="session")
def model() -> CapsuleModel:
    """Calibrated default model (force tables cached across tests)."""
    return default_config().build_model()


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
