"""Acceptance suite: one test per release criterion, at its stated tolerance.

Each test prints one ``[acceptance] <criterion>: PASS/FAIL`` line (visible
with ``pytest -s`` or in captured output).  The calibrated parameter set
used by the behavioural criteria is the one committed at
``configs/calibrated.yaml``.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from capsulesim import (
    CapsuleModel,
    CapsuleParams,
    CapsuleState,
    CoilSpec,
    Coil,
    DriveCommand,
    DriveMethod,
    ImpactSide,
    MagnetState,
    MU_0,
    SweepPlan,
    average_speed,
    deviation_angle,
    discretize_ellipse,
    field_at,
    field_gradient,
    field_of_coils,
    load_config,
    resolve_impact,
    run_sweep,
    wrench_on_dipole,
)
from capsulesim.service import Session

CALIBRATED = Path(__file__).resolve().parents[1] / "configs" / "calibrated.yaml"


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


@pytest.fixture(scope="module")
def calibrated_config():
    return load_config(CALIBRATED)


@pytest.fixture(scope="module")
def calibrated_model(calibrated_config):
    return calibrated_config.build_model()


@pytest.fixture(scope="module")
def table_coil():
    return Coil(
        CoilSpec(semi_major=4.5e-3, semi_minor=3.0e-3, turns=50,
                 current_amplitude=0.5)
    )


def test_loop_field_oracle():
    """Polygonised loop matches mu0*I*N*R^2 / (2 (R^2+z^2)^(3/2)) to 0.1 %."""
    with criterion("loop-field oracle (0.1 %, n_segments = 256, < 1 s)"):
        start = time.perf_counter()
        radius, turns, current = 5e-3, 50, 0.5
        poly = discretize_ellipse(
            CoilSpec(semi_major=radius, semi_minor=radius, turns=turns,
                     current_amplitude=current, n_segments=256)
        )
        for z in np.linspace(0.0, 5.0 * radius, 10):
            b = field_at(poly, current, turns, np.array([0.0, 0.0, z]))
            exact = MU_0 * current * turns * radius**2 / (
                2.0 * (radius**2 + z**2) ** 1.5
            )
            assert abs(b[2] - exact) <= 1e-3 * exact
        assert time.perf_counter() - start < 1.0


def test_force_oracle(table_coil):
    """Dipole force equals the energy gradient -d(-m.B)/dx to 1e-6 relative."""
    with criterion("dipole force vs energy-gradient oracle (1e-6, < 5 s)"):
        start = time.perf_counter()
        rng = np.random.default_rng(7)
        magnet = load_config(CALIBRATED).capsule.magnet
        h = 1e-6
        for _ in range(20):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            point = rng.uniform(7e-3, 15e-3) * direction
            m_dir = rng.normal(size=3)
            m_dir /= np.linalg.norm(m_dir)
            moment = magnet.moment_magnitude * m_dir
            force = wrench_on_dipole([table_coil], magnet, point, m_dir).force
            oracle = np.empty(3)
            for j in range(3):
                offset = np.zeros(3)
                offset[j] = h
                u_hi = -moment @ field_of_coils([table_coil], point + offset)
                u_lo = -moment @ field_of_coils([table_coil], point - offset)
                oracle[j] = -(u_hi - u_lo) / (2.0 * h)
            assert np.linalg.norm(force - oracle) <= 1e-6 * np.linalg.norm(oracle)
        assert time.perf_counter() - start < 5.0


def test_maxwell_identities(table_coil):
    """div B = 0 and Jacobian symmetry to 1e-6 relative at 50 exterior points."""
    with criterion("Maxwell identities (1e-6 relative, 50 points)"):
        rng = np.random.default_rng(11)
        for _ in range(50):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            point = rng.uniform(6e-3, 25e-3) * direction
            jac = field_gradient([table_coil], point)
            scale = np.linalg.norm(jac)
            assert abs(np.trace(jac)) < 1e-6 * scale
            assert np.linalg.norm(jac - jac.T) < 1e-6 * scale


def test_force_distance_curve(table_coil, calibrated_config):
    """On-axis force magnitude strictly decreases beyond 2 mm separation."""
    with criterion("force-distance curve strictly decreasing beyond 2 mm"):
        magnet = calibrated_config.capsule.magnet
        axis = np.array([0.0, 0.0, 1.0])
        distances = np.arange(2e-3, 30e-3, 0.25e-3)
        magnitudes = [
            np.linalg.norm(
                wrench_on_dipole([table_coil], magnet, d * axis, axis).force
            )
            for d in distances
        ]
        assert all(b < a for a, b in zip(magnitudes, magnitudes[1:]))


def test_impact_suite():
    """Momentum conserved to 1e-12; speed ratio equals e to 1e-9."""
    with criterion("impact suite (momentum 1e-12, ratio 1e-9, e in {0..1})"):
        axis = np.array([1.0, 0.0])
        for e in (0.0, 0.25, 0.5, 0.75, 1.0):
            params = CapsuleParams(restitution=e)
            m1, m2 = params.magnet.mass, params.body_mass
            for u, side in ((0.37, ImpactSide.FRONT), (-0.21, ImpactSide.BACK)):
                s = params.half_stroke if side is ImpactSide.FRONT else -params.half_stroke
                pre = CapsuleState(
                    velocity=np.array([0.004, 0.0]),
                    magnet=MagnetState(s=s, v_s=u),
                )
                post = resolve_impact(pre, params, side, axis=axis)
                p_pre = m1 * (pre.velocity[0] + u) + m2 * pre.velocity[0]
                p_post = (
                    m1 * (post.velocity[0] + post.magnet.v_s)
                    + m2 * post.velocity[0]
                )
                assert abs(p_post - p_pre) <= 1e-12 * abs(p_pre)
                assert abs(abs(post.magnet.v_s) / abs(u) - e) <= 1e-9


def test_stroke_containment(calibrated_model):
    """|s| never exceeds 1.2 mm + 1e-12 in a 10 s four-coil 30 Hz run."""
    with criterion("stroke containment over 10 s at 30 Hz"):
        cmd = DriveCommand(method=DriveMethod.FOUR_COIL, frequency=30.0, duty=0.6)
        traj = calibrated_model.simulate(cmd, 10.0)
        assert np.max(np.abs(traj.s)) <= 1.2e-3 + 1e-12


def test_deviation_angle(calibrated_model):
    """5 s four-coil 30 Hz / 60 % run deviates 22 deg +/- 3 deg."""
    with criterion("deviation angle 22 deg +/- 3 deg"):
        cmd = DriveCommand(method=DriveMethod.FOUR_COIL, frequency=30.0, duty=0.6)
        traj = calibrated_model.simulate(cmd, 5.0)
        angle = deviation_angle(traj)
        assert angle is not None
        assert abs(angle - 22.0) <= 3.0


def test_direction_reversal(calibrated_model):
    """One-coil 10 Hz: forward at 30 % duty, backward at 80 %, 1-20 mm/s."""
    with criterion("one-coil reversal at 10 Hz (30 % fwd, 80 % back)"):
        def speed(duty: float) -> float:
            cmd = DriveCommand(
                method=DriveMethod.ONE_COIL, frequency=10.0, duty=duty
            )
            return average_speed(calibrated_model.simulate(cmd, 5.0))

        forward = speed(0.3)
        backward = speed(0.8)
        assert 1e-3 <= forward <= 20e-3
        assert -20e-3 <= backward <= -1e-3


def test_sweep_ranking(calibrated_config):
    """Four-coil optimum at (30 Hz, 50-70 %); four-coil beats one-coil at 30 Hz."""
    with criterion("sweep ranking (max cell at 30 Hz/50-70 %, < 5 min)"):
        start = time.perf_counter()
        plan = SweepPlan(
            methods=(DriveMethod.ONE_COIL, DriveMethod.FOUR_COIL),
            frequencies=(10.0, 20.0, 30.0),
            duties=(0.3, 0.4, 0.5, 0.6, 0.7, 0.8),
            duration=5.0,
        )
        result = run_sweep(plan, calibrated_config)
        assert not any(c.failed for c in result.cells)

        best_four = result.best_cell(DriveMethod.FOUR_COIL)
        assert best_four.frequency == 30.0
        assert 0.5 <= best_four.duty <= 0.7

        four_at_30 = max(
            c.mean_speed
            for c in result.cells
            if c.method is DriveMethod.FOUR_COIL and c.frequency == 30.0
        )
        one_at_30 = max(
            c.mean_speed
            for c in result.cells
            if c.method is DriveMethod.ONE_COIL and c.frequency == 30.0
        )
        assert four_at_30 > one_at_30
        assert time.perf_counter() - start < 300.0


def test_determinism_and_step_robustness(calibrated_config):
    """Bit-identical reruns; halving dt moves the 5 s speed by < 1 %."""
    with criterion("determinism and dt-halving robustness (< 1 %)"):
        cmd = calibrated_config.drive
        model_a = calibrated_config.build_model()
        model_b = calibrated_config.build_model()
        traj_a = model_a.simulate(cmd, 5.0)
        traj_b = model_b.simulate(cmd, 5.0)
        for field in ("t", "x", "y", "s", "v_s", "vx", "vy"):
            np.testing.assert_array_equal(
                getattr(traj_a, field), getattr(traj_b, field)
            )

        half_dt = CapsuleModel(
            calibrated_config.capsule,
            calibrated_config.coils,
            dt=calibrated_config.sim.dt / 2.0,
            output_rate=calibrated_config.sim.output_rate,
            table_samples=calibrated_config.sim.force_table_samples,
        )
        v_full = average_speed(traj_a)
        v_half = average_speed(half_dt.simulate(cmd, 5.0))
        assert abs(v_half - v_full) < 0.01 * abs(v_full)


def test_session_batch_equivalence(calibrated_config):
    """An untouched session reproduces the batch trajectory bit-exactly."""
    with criterion("session/batch equivalence (bit-exact)"):
        session = Session(calibrated_config)
        session.apply_control(
            {"type": "control", "protocol_version": 1, "resume": True}
        )
        rate = calibrated_config.service.telemetry_rate
        states = []
        for _ in range(int(rate * 2.0)):
            session.tick()
            states.append(session.state)

        model = calibrated_config.build_model()
        batch = model.simulate(calibrated_config.drive, 2.0, output_rate=rate)
        assert len(states) == len(batch) - 1
        for k, st in enumerate(states, start=1):
            assert st.t == batch.t[k]
            assert st.position[0] == batch.x[k]
            assert st.position[1] == batch.y[k]
            assert st.magnet.s == batch.s[k]
            assert st.magnet.v_s == batch.v_s[k]
