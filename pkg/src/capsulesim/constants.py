"""Physical constants used throughout the simulator (SI units)."""

import math

# Magnetic constant (vacuum permeability), T*m/A
MU_0: float = 4.0 * math.pi * 1e-7

# Gravitational acceleration, m/s^2
GRAVITY: float = 9.81
