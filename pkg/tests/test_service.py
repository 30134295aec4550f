"""Tests for the session engine and the websocket service."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from capsulesim import (
    ConfigError,
    DriveDirection,
    Session,
    SessionManager,
    config_from_dict,
    create_app,
    default_config,
)
from capsulesim.service import PROTOCOL_VERSION


def make_session(**overrides) -> Session:
    config = config_from_dict(overrides or None)
    return Session(config)


def control(**fields) -> dict:
    msg = {"type": "control", "protocol_version": PROTOCOL_VERSION}
    msg.update(fields)
    return msg


class TestSessionLifecycle:
    def test_created_paused_at_zero(self):
        session = make_session()
        assert session.paused
        assert session.t == 0.0

    def test_config_echoes_prototype_values(self):
        session = make_session()
        assert session.config.capsule.magnet.mass == 0.92e-3
        assert session.config.coils.turns == 50
        assert session.config.capsule.bearing_mu == 0.097

    def test_distinct_ids(self):
        a, b = make_session(), make_session()
        assert a.id != b.id

    def test_invalid_config_rejected_with_field(self):
        with pytest.raises(ConfigError, match="drive.duty"):
            make_session(drive={"duty": 1.5})


class TestControls:
    def test_pause_resume_roundtrip(self):
        session = make_session()
        session.apply_control(control(resume=True))
        assert not session.paused
        session.tick()
        t_running = session.t
        assert t_running > 0.0
        session.apply_control(control(pause=True))
        before = session.state
        for _ in range(3):
            frame = session.tick()  # heartbeats
            assert frame["t"] == t_running
        after = session.state
        assert after.t == before.t
        np.testing.assert_array_equal(after.position, before.position)

    def test_malformed_control_leaves_session_unchanged(self):
        session = make_session()
        before_cmd = session.command
        reply = session.apply_control(control(duty=1.5))
        assert reply["type"] == "error"
        assert reply["ok"] is False
        assert reply["field"] == "duty"
        assert session.command == before_cmd

    def test_unknown_field_rejected(self):
        session = make_session()
        reply = session.apply_control(control(thrust=11))
        assert reply["type"] == "error"
        assert reply["field"] == "thrust"

    def test_protocol_version_required(self):
        session = make_session()
        reply = session.apply_control({"type": "control", "duty": 0.5})
        assert reply["type"] == "error"
        assert reply["field"] == "protocol_version"

    def test_command_patch_applies_and_resets_phase(self):
        session = make_session()
        session.apply_control(control(resume=True))
        session.run_for(0.5)
        t_change = session.t
        reply = session.apply_control(control(frequency=10.0, duty=0.4))
        assert reply["type"] == "ack"
        assert reply["applied"]["command"]["frequency"] == 10.0
        assert session.command.frequency == 10.0
        assert session.command.duty == 0.4
        # Waveform phase restarts at the change.
        assert session._runner.cmd_epoch == t_change

    def test_set_method_and_direction(self):
        session = make_session()
        reply = session.apply_control(
            control(method="one_coil", direction="BL", current=0.3)
        )
        assert reply["ok"]
        assert session.command.method.value == "one_coil"
        assert session.command.direction is DriveDirection.BACKWARD_LEFT
        assert session.command.current_amplitude == 0.3

    def test_reset_restores_initial_state(self):
        session = make_session()
        session.apply_control(control(resume=True))
        session.run_for(1.0)
        assert session.t > 0.0
        reply = session.apply_control(control(reset=True))
        assert reply["ok"]
        assert session.t == 0.0
        np.testing.assert_array_equal(session.state.position, np.zeros(2))


class TestTelemetry:
    def test_message_count_matches_rate(self):
        session = make_session(service={"telemetry_rate_hz": 30.0})
        sub = session.subscribe(capacity=1000)
        session.apply_control(control(resume=True))
        session.run_for(2.0)
        frames = []
        while (frame := sub.pop(timeout=0.0)) is not None:
            frames.append(json.loads(frame))
        assert len(frames) == 60
        times = [f["t"] for f in frames]
        assert all(b > a for a, b in zip(times, times[1:]))

    def test_state_message_fields(self):
        session = make_session()
        session.apply_control(control(resume=True))
        session.run_for(1.0)
        msg = session.state_message()
        assert set(msg) == {
            "type", "protocol_version", "t", "x", "y", "heading",
            "s", "v_s", "avg_speed_window", "deviation_deg",
        }
        assert msg["type"] == "state"
        assert msg["protocol_version"] == PROTOCOL_VERSION
        assert msg["t"] == pytest.approx(1.0)
        # Default forward-right drive: deviation settles near the 22 deg tilt.
        assert msg["deviation_deg"] == pytest.approx(22.0, abs=1.0)
        assert msg["avg_speed_window"] != 0.0

    def test_slow_subscriber_drops_oldest(self):
        session = make_session()
        sub = session.subscribe(capacity=4)
        session.apply_control(control(resume=True))
        session.run_for(1.0)  # 30 frames into a 4-slot buffer
        frames = []
        while (frame := sub.pop(timeout=0.0)) is not None:
            frames.append(json.loads(frame))
        assert len(frames) == 4
        assert sub.dropped == 26
        assert frames[-1]["t"] == pytest.approx(1.0)

    def test_frequency_change_visible_in_telemetry(self):
        # The magnet shuttles once per drive period, so the dominant
        # spectral line of s(t) in the telemetry sits at the drive frequency.
        def dominant_frequency(freq: float) -> float:
            session = make_session(
                drive={"frequency_hz": freq},
                service={"telemetry_rate_hz": 120.0},
            )
            sub = session.subscribe(capacity=100000)
            session.apply_control(control(resume=True))
            session.run_for(2.0)
            s = []
            while (frame := sub.pop(timeout=0.0)) is not None:
                s.append(json.loads(frame)["s"])
            s = np.asarray(s) - np.mean(s)
            spectrum = np.abs(np.fft.rfft(s))
            freqs = np.fft.rfftfreq(len(s), d=1.0 / 120.0)
            return freqs[np.argmax(spectrum)]

        assert dominant_frequency(10.0) == pytest.approx(10.0, abs=1.0)
        assert dominant_frequency(30.0) == pytest.approx(30.0, abs=1.0)

    def test_dropped_telemetry_does_not_affect_simulation(self):
        fast = make_session()
        slow = make_session()
        slow.subscribe(capacity=1)
        for session in (fast, slow):
            session.apply_control(control(resume=True))
            session.run_for(1.0)
        assert fast.state.t == slow.state.t
        np.testing.assert_array_equal(fast.state.position, slow.state.position)


class TestBatchEquivalence:
    def test_session_matches_batch_bit_exactly(self):
        config = config_from_dict({"service": {"telemetry_rate_hz": 50.0}})
        session = Session(config)
        sub = session.subscribe(capacity=10000)
        session.apply_control(control(resume=True))
        session.run_for(2.0)

        model = config.build_model()
        batch = model.simulate(config.drive, 2.0, output_rate=50.0)

        frames = []
        while (frame := sub.pop(timeout=0.0)) is not None:
            frames.append(json.loads(frame))
        assert len(frames) == 100
        for k, frame in enumerate(frames, start=1):
            assert frame["t"] == batch.t[k]
            assert frame["x"] == batch.x[k]
            assert frame["y"] == batch.y[k]
            assert frame["s"] == batch.s[k]
            assert frame["v_s"] == batch.v_s[k]

    def test_direction_switch_mirrors(self):
        # F-R then F-L vs F-L then F-R: lateral trajectories mirror exactly.
        def run(first: str, second: str) -> tuple[list[float], list[float]]:
            session = make_session()
            session.apply_control(control(resume=True, direction=first))
            session.run_for(1.0)
            session.apply_control(control(direction=second))
            session.run_for(1.0)
            sub_x, sub_y = [], []
            state = session.state
            return state.position[0], state.position[1]

        x_rl, y_rl = run("FR", "FL")
        x_lr, y_lr = run("FL", "FR")
        assert x_rl == pytest.approx(x_lr, abs=1e-12)
        assert y_rl == pytest.approx(-y_lr, abs=1e-12)


class TestWorkerThread:
    def test_accelerated_clock_outpaces_wall_time(self):
        config = config_from_dict({"service": {"telemetry_rate_hz": 50.0}})
        session = Session(config, accel_factor=20.0)
        session.apply_control(control(resume=True))
        session.start()
        try:
            wall = 0.6
            time.sleep(wall)
        finally:
            session.stop()
        # ~20x wall pace; generous bounds for a loaded CI box.
        assert session.t > 2.0 * wall
        assert session.t < 40.0 * wall

    def test_queued_control_acked_by_worker(self):
        session = make_session()
        session.start()
        try:
            reply = session.submit_control(control(resume=True))
            assert reply["ok"]
            deadline = time.monotonic() + 5.0
            while session.t == 0.0 and time.monotonic() < deadline:
                time.sleep(0.02)
            assert session.t > 0.0
        finally:
            session.stop()


class TestWebSocket:
    @pytest.fixture()
    def client(self):
        from fastapi.testclient import TestClient

        manager = SessionManager()
        app = create_app(manager, default_config=default_config())
        with TestClient(app) as client:
            client.manager = manager
            yield client
        manager.shutdown()

    def test_create_session_and_stream(self, client):
        created = client.post("/sessions", json={}).json()
        session_id = created["session_id"]
        assert created["telemetry_rate"] == 30.0
        listed = client.get("/sessions").json()
        assert session_id in listed["sessions"]

        with client.websocket_connect(f"/ws/{session_id}") as ws:
            ws.send_text(json.dumps(control(resume=True)))
            got_ack = False
            got_state = False
            for _ in range(20):
                msg = json.loads(ws.receive_text())
                if msg["type"] == "ack":
                    got_ack = True
                if msg["type"] == "state":
                    got_state = True
                    assert msg["protocol_version"] == PROTOCOL_VERSION
                if got_ack and got_state:
                    break
            assert got_ack and got_state

    def test_invalid_session_config_rejected(self, client):
        response = client.post("/sessions", json={"drive": {"duty": 1.5}})
        assert response.status_code == 422
        body = response.json()
        assert body["field"] == "drive.duty"

    def test_second_client_is_read_only(self, client):
        session_id = client.post("/sessions", json={}).json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as first:
            with client.websocket_connect(f"/ws/{session_id}") as second:
                second.send_text(json.dumps(control(pause=True)))
                for _ in range(20):
                    msg = json.loads(second.receive_text())
                    if msg["type"] == "error":
                        assert "read-only" in msg["message"]
                        break
                else:
                    pytest.fail("observer control was not rejected")

    def test_bad_json_gets_error_reply(self, client):
        session_id = client.post("/sessions", json={}).json()["session_id"]
        with client.websocket_connect(f"/ws/{session_id}") as ws:
            ws.send_text("{not json")
            for _ in range(20):
                msg = json.loads(ws.receive_text())
                if msg["type"] == "error":
                    assert "invalid JSON" in msg["message"]
                    break
            else:
                pytest.fail("malformed frame was not rejected")

    def test_unknown_session_rejected(self, client):
        response = client.get("/sessions/nope")
        assert response.status_code == 404
