"""Tests for the vibro-impact dynamics: impacts, friction, integration."""

from __future__ import annotations

import math

import numpy as np
import pytest

from capsulesim import (
    CapsuleModel,
    CapsuleParams,
    CapsuleState,
    DriveCommand,
    DriveDirection,
    ImpactSide,
    MagnetState,
    SimulationValidationError,
    Trajectory,
    average_speed,
    deviation_angle,
    ground_friction,
    resolve_impact,
)
from capsulesim.dynamics import DT_MAX, IntegrationDivergedError


def state_at_stop(params: CapsuleParams, v_s: float, front: bool = True) -> CapsuleState:
    s = params.half_stroke if front else -params.half_stroke
    return CapsuleState(magnet=MagnetState(s=s, v_s=v_s))


# ---------------------------------------------------------------------------
# Impact law
# ---------------------------------------------------------------------------


class TestResolveImpact:
    def test_elastic_equal_masses_exchange_velocities(self):
        params = CapsuleParams(
            body_mass=0.92e-3, restitution=1.0, ground_mu_static=0.0,
            ground_mu_kinetic=0.0,
        )
        axis = np.array([1.0, 0.0])
        state = state_at_stop(params, v_s=0.2)
        post = resolve_impact(state, params, ImpactSide.FRONT, axis=axis)
        # Equal masses, e = 1: the magnet's axis velocity moves to the body.
        assert post.velocity[0] == pytest.approx(0.2, rel=1e-12)
        assert post.magnet.v_s == pytest.approx(-0.2, rel=1e-12)
        magnet_abs = post.velocity[0] + post.magnet.v_s
        assert magnet_abs == pytest.approx(0.0, abs=1e-15)

    def test_plastic_impact_zeroes_relative_velocity(self):
        params = CapsuleParams(restitution=0.0)
        post = resolve_impact(
            state_at_stop(params, 0.15), params, ImpactSide.FRONT,
            axis=np.array([1.0, 0.0]),
        )
        assert post.magnet.v_s == 0.0

    def test_two_body_closed_form(self):
        # Oracle: impulsive two-body collision algebra for e = 0.5,
        # m1 = 0.92 g, m2 = 4.46 g, u = 0.1 m/s (frozen values):
        #   v_rel' = -e u                      = -0.05
        #   dv_body = (1+e) m1/(m1+m2) u       = 0.025650557620817846
        #   magnet_abs' = u - (1+e) m2/(m1+m2) u = -0.02434944237918217
        params = CapsuleParams(restitution=0.5)
        axis = np.array([1.0, 0.0])
        post = resolve_impact(
            state_at_stop(params, 0.1), params, ImpactSide.FRONT, axis=axis
        )
        assert post.magnet.v_s == pytest.approx(-0.05, rel=1e-12)
        assert post.velocity[0] == pytest.approx(0.025650557620817846, rel=1e-12)
        magnet_abs = post.velocity[0] + post.magnet.v_s
        assert magnet_abs == pytest.approx(-0.02434944237918217, rel=1e-12)

    @pytest.mark.parametrize("restitution", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_momentum_conserved_and_ratio_exact(self, restitution):
        params = CapsuleParams(restitution=restitution)
        axis = np.array([1.0, 0.0])
        m1, m2 = params.magnet.mass, params.body_mass
        for u, side in ((0.321, ImpactSide.FRONT), (-0.17, ImpactSide.BACK)):
            pre = state_at_stop(params, u, front=side is ImpactSide.FRONT)
            post = resolve_impact(pre, params, side, axis=axis)
            p_pre = m1 * (pre.velocity[0] + u) + m2 * pre.velocity[0]
            p_post = m1 * (post.velocity[0] + post.magnet.v_s) + m2 * post.velocity[0]
            assert abs(p_post - p_pre) <= 1e-12 * max(abs(p_pre), 1e-30)
            ratio = abs(post.magnet.v_s) / abs(u)
            assert ratio == pytest.approx(restitution, abs=1e-9)
            # Post-impact speed never exceeds the approach speed.
            assert abs(post.magnet.v_s) <= abs(u)

    def test_rejects_non_contact_state(self):
        params = CapsuleParams()
        with pytest.raises(SimulationValidationError):
            resolve_impact(CapsuleState(), params, ImpactSide.FRONT)
        with pytest.raises(SimulationValidationError):
            # At the stop but moving away.
            resolve_impact(
                state_at_stop(params, v_s=-0.1), params, ImpactSide.FRONT
            )


# ---------------------------------------------------------------------------
# Ground friction
# ---------------------------------------------------------------------------


class TestGroundFriction:
    def test_stiction_cancels_small_force(self):
        params = CapsuleParams()
        friction = ground_friction(
            np.array([0.001, 0.0]), np.zeros(2), params
        )
        np.testing.assert_array_equal(friction, [-0.001, 0.0])

    def test_kinetic_friction_opposes_sliding(self):
        # mu_k * (m1 + m2) * g with mu_k = 0.3 and the 5.38 g prototype.
        params = CapsuleParams(ground_mu_kinetic=0.3, ground_mu_static=0.35)
        friction = ground_friction(
            np.zeros(2), np.array([0.01, 0.0]), params
        )
        expected = -0.3 * 5.38e-3 * 9.81
        assert friction[0] == pytest.approx(expected, rel=1e-12)
        assert friction[1] == 0.0

    def test_zero_kinetic_coefficient(self):
        params = CapsuleParams(ground_mu_kinetic=0.0, ground_mu_static=0.0)
        friction = ground_friction(
            np.array([0.5, 0.5]), np.array([0.02, -0.01]), params
        )
        np.testing.assert_array_equal(friction, np.zeros(2))

    def test_breakaway_opposes_applied_force(self):
        params = CapsuleParams(ground_mu_static=0.2, ground_mu_kinetic=0.15)
        load = params.normal_load
        force = np.array([10.0 * load, 0.0])  # far outside the cone
        friction = ground_friction(force, np.zeros(2), params)
        assert friction[0] == pytest.approx(-0.15 * load, rel=1e-12)


# ---------------------------------------------------------------------------
# Single step behaviour
# ---------------------------------------------------------------------------


class TestStep:
    def test_zero_current_at_rest_is_fixed_point(self, model):
        cmd = DriveCommand(current_amplitude=0.0)
        state = CapsuleState()
        post = model.step(state, cmd, DT_MAX)
        assert post.t == pytest.approx(DT_MAX)
        np.testing.assert_array_equal(post.position, state.position)
        np.testing.assert_array_equal(post.velocity, state.velocity)
        assert post.magnet == state.magnet

    def test_magnet_released_at_stop_without_force_stays(self):
        params = CapsuleParams(bearing_mu=0.0)
        model = CapsuleModel(params)
        cmd = DriveCommand(current_amplitude=0.0)
        state = CapsuleState(magnet=MagnetState(s=params.half_stroke, v_s=0.0))
        post = state
        for _ in range(50):
            post = model.step(post, cmd, DT_MAX)
        assert post.magnet.s == params.half_stroke
        assert post.magnet.v_s == 0.0

    def test_oversized_step_rejected(self, model):
        with pytest.raises(SimulationValidationError, match="dt"):
            model.step(CapsuleState(), DriveCommand(), 1e-3)

    def test_non_finite_state_rejected(self, model):
        bad = CapsuleState(velocity=np.array([math.nan, 0.0]))
        with pytest.raises(IntegrationDivergedError, match="vx"):
            model.step(bad, DriveCommand(), DT_MAX)


# ---------------------------------------------------------------------------
# Whole-run properties
# ---------------------------------------------------------------------------


class TestSimulate:
    def test_zero_current_zero_displacement(self, model):
        traj = model.simulate(DriveCommand(current_amplitude=0.0), 1.5)
        assert np.max(np.abs(traj.x)) == 0.0
        assert np.max(np.abs(traj.y)) == 0.0

    def test_stiction_holds_for_weak_drive(self, model):
        # Drive far below the breakaway force: nothing may move, exactly.
        cmd = DriveCommand(current_amplitude=0.005, frequency=30.0)
        traj = model.simulate(cmd, 10.0 / 30.0, output_rate=3000.0)
        assert np.max(np.abs(traj.x)) == 0.0
        assert np.max(np.abs(traj.y)) == 0.0

    def test_stroke_containment(self, model):
        traj = model.simulate(DriveCommand(), 2.0)
        assert np.max(np.abs(traj.s)) <= 1.2e-3 + 1e-12

    def test_determinism(self):
        runs = [
            CapsuleModel(CapsuleParams()).simulate(DriveCommand(), 1.5)
            for _ in range(2)
        ]
        for field in ("t", "x", "y", "s", "v_s", "vx", "vy"):
            np.testing.assert_array_equal(
                getattr(runs[0], field), getattr(runs[1], field)
            )

    def test_energy_non_increasing_force_free(self, model):
        # Coast-down with no drive: bearing + ground friction and e < 1
        # impacts may only remove kinetic energy.
        state = CapsuleState(
            velocity=np.array([0.03, 0.01]), magnet=MagnetState(s=0.0, v_s=0.4)
        )
        runner = model.runner(DriveCommand(current_amplitude=0.0), state)
        energy = runner.core.mechanical_energy()
        for k in range(1, 150):
            runner.advance_to(k * 1e-3)
            new_energy = runner.core.mechanical_energy()
            assert new_energy <= energy + 1e-15
            energy = new_energy
        assert energy == pytest.approx(0.0, abs=1e-12)

    def test_deviation_angle_matches_tilt(self, model):
        traj = model.simulate(DriveCommand(frequency=30.0, duty=0.6), 2.0)
        assert deviation_angle(traj) == pytest.approx(22.0, abs=0.5)

    def test_left_right_mirror_symmetry(self, model):
        cmd_r = DriveCommand(direction=DriveDirection.FORWARD_RIGHT)
        cmd_l = DriveCommand(direction=DriveDirection.FORWARD_LEFT)
        tr = model.simulate(cmd_r, 1.5)
        tl = model.simulate(cmd_l, 1.5)
        np.testing.assert_allclose(tr.x, tl.x, atol=1e-12)
        np.testing.assert_allclose(tr.y, -tl.y, atol=1e-12)
        np.testing.assert_allclose(tr.s, tl.s, atol=1e-12)

    def test_session_step_equals_simulate(self, model):
        # One fixed command: chunked advancing must agree bit-exactly with
        # the batch run sampled at the same rate.
        cmd = DriveCommand()
        batch = model.simulate(cmd, 1.0, output_rate=50.0)
        runner = model.runner(cmd)
        tick = 1.0 / 50.0  # the same arithmetic the batch sampler uses
        states = [runner.state]
        for k in range(1, 51):
            runner.advance_to(k * tick)
            states.append(runner.state)
        assert len(states) == len(batch)
        for row, st in enumerate(states):
            assert batch.t[row] == st.t
            assert batch.x[row] == st.position[0]
            assert batch.y[row] == st.position[1]
            assert batch.s[row] == st.magnet.s
            assert batch.v_s[row] == st.magnet.v_s


# ---------------------------------------------------------------------------
# Trajectory reductions
# ---------------------------------------------------------------------------


def straight_trajectory(
    distance: float, seconds: float, angle_deg: float = 0.0, n: int = 11
) -> Trajectory:
    t = np.linspace(0.0, seconds, n)
    angle = math.radians(angle_deg)
    x = np.linspace(0.0, distance * math.cos(angle), n)
    y = np.linspace(0.0, distance * math.sin(angle), n)
    zeros = np.zeros(n)
    return Trajectory(
        t=t, x=x, y=y, s=zeros, v_s=zeros, vx=zeros, vy=zeros, heading=zeros,
        drive_axis=np.array([math.cos(angle), math.sin(angle)]),
        capsule_axis=np.array([1.0, 0.0]),
    )


class TestReductions:
    def test_average_speed_straight_line(self):
        traj = straight_trajectory(10e-3, 2.0)
        assert average_speed(traj) == pytest.approx(5e-3, rel=1e-12)

    def test_average_speed_signed(self):
        traj = straight_trajectory(-8e-3, 2.0)
        assert average_speed(traj) == pytest.approx(-4e-3, rel=1e-12)

    def test_stationary_trajectory(self):
        traj = straight_trajectory(0.0, 2.0)
        assert average_speed(traj) == 0.0
        assert deviation_angle(traj) is None

    def test_deviation_angle_constructed(self):
        traj = straight_trajectory(10e-3, 2.0, angle_deg=22.0)
        assert deviation_angle(traj) == pytest.approx(22.0, abs=1e-9)

    def test_short_trajectory_rejected(self):
        traj = straight_trajectory(1e-3, 0.5)
        with pytest.raises(SimulationValidationError, match=">= 1 s"):
            average_speed(traj)

    def test_trajectory_csv_roundtrip(self, tmp_path, model):
        traj = model.simulate(DriveCommand(), 1.0, output_rate=100.0)
        path = tmp_path / "traj.csv"
        traj.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "t,x,y,s,v_s,vx,vy"
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (len(traj), 7)
        np.testing.assert_allclose(data[:, 1], traj.x, rtol=1e-9, atol=1e-15)
