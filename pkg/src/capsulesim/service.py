"""Interactive simulation sessions and the websocket service.

A session owns one simulation run and advances it on telemetry ticks: each
tick moves sim time forward by one telemetry interval and emits a state
message.  Control messages are applied between ticks (never mid-step) and
reset the drive waveform phase.  A session with no control changes therefore
reproduces the batch trajectory bit-exactly when sampled at the same rate.

Telemetry fan-out is latest-wins: a slow subscriber loses the oldest unsent
messages, and the simulation loop never blocks on a client.

Wire protocol (JSON text frames over a websocket, one message per frame; see
docs/protocol.md for examples):

* server -> client: ``{"type": "state", "protocol_version": 1, "t": ...,
  "x": ..., "y": ..., "heading": ..., "s": ..., "v_s": ...,
  "avg_speed_window": ..., "deviation_deg": ...}``
* client -> server: ``{"type": "control", "protocol_version": 1, ...}`` with
  any of ``method, frequency, duty, direction, current, pause, resume,
  reset``.
* server replies to every control with an ``ack`` or ``error`` message.
"""

from __future__ import annotations

import asyncio
import json
import math
import threading
import time
import uuid
from collections import deque
from typing import Any

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .actuation import DriveCommand
from .config import ConfigError, SimConfig, config_from_dict, drive_command_from_dict
from .dynamics import CapsuleState

PROTOCOL_VERSION = 1

# Control fields that map onto DriveCommand plus the session verbs.
_CONTROL_KEYS = {
    "type", "protocol_version",
    "method", "frequency", "duty", "direction", "current",
    "pause", "resume", "reset",
}


class SessionError(RuntimeError):
    pass


# Wire names of the drive fields vs the config-file keys they map onto.
_WIRE_TO_CONFIG = {
    "method": "method",
    "frequency": "frequency_hz",
    "duty": "duty",
    "direction": "direction",
    "current": "current_a",
}
_CONFIG_TO_WIRE = {v: k for k, v in _WIRE_TO_CONFIG.items()}


def _drive_patch_from_control(msg: dict, base: DriveCommand) -> DriveCommand | None:
    """New command from the drive fields of a control message, or None."""
    mapping = {
        config_key: msg[wire_key]
        for wire_key, config_key in _WIRE_TO_CONFIG.items()
        if wire_key in msg
    }
    if not mapping:
        return None
    try:
        return drive_command_from_dict(mapping, section_name="control", base=base)
    except ConfigError as exc:
        # Report the wire-level field name back to the client.
        key = exc.field.split(".", 1)[-1]
        wire = _CONFIG_TO_WIRE.get(key, key)
        raise ConfigError(wire, str(exc).split(": ", 1)[-1]) from None


class _Subscriber:
    """Bounded telemetry buffer with latest-wins overflow."""

    def __init__(self, capacity: int = 16) -> None:
        self._buffer: deque[str] = deque(maxlen=capacity)
        self._cond = threading.Condition()
        self.closed = False
        self.dropped = 0

    def push(self, frame: str) -> None:
        with self._cond:
            if len(self._buffer) == self._buffer.maxlen:
                self.dropped += 1
            self._buffer.append(frame)
            self._cond.notify()

    def pop(self, timeout: float | None = None) -> str | None:
        with self._cond:
            if not self._buffer:
                self._cond.wait(timeout)
            if not self._buffer:
                return None
            return self._buffer.popleft()

    def close(self) -> None:
        with self._cond:
            self.closed = True
            self._cond.notify_all()


class Session:
    """One live simulation session.

    The session can be driven synchronously (``tick()``) for deterministic
    use, or by ``start()`` which spawns a paced worker thread (realtime or
    accelerated).  Exactly one controller may hold the session; any number
    of read-only observers may subscribe.
    """

    def __init__(
        self,
        config: SimConfig,
        *,
        session_id: str | None = None,
        accel_factor: float = 1.0,
        idle_timeout: float | None = None,
    ) -> None:
        if accel_factor <= 0.0:
            raise ConfigError("accel_factor", "must be > 0")
        self.idle_timeout = idle_timeout
        self.id = session_id or uuid.uuid4().hex
        self.config = config
        self.accel_factor = accel_factor
        self.model = config.build_model()
        self.paused = True
        self.telemetry_rate = config.service.telemetry_rate
        self._tick_dt = 1.0 / self.telemetry_rate
        self._runner = self.model.runner(config.drive)
        self._epoch_t = self._runner.t
        self._tick_count = 0
        self._window: deque[tuple[float, float, float]] = deque()
        self._subscribers: list[_Subscriber] = []
        self._controls: deque[tuple[dict, "_Pending"]] = deque()
        self._lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self.controller: str | None = None
        self._last_client_seen = time.monotonic()
        self._record_window()

    # -- state reduction ------------------------------------------------------

    def _record_window(self) -> None:
        core = self._runner.core
        self._window.append((core.t, core.x, core.y))
        horizon = core.t - self.config.service.speed_window
        while len(self._window) > 2 and self._window[0][0] < horizon:
            self._window.popleft()

    def state_message(self) -> dict[str, Any]:
        """Current telemetry message (also used for paused heartbeats)."""
        core = self._runner.core
        t0, x0, y0 = self._window[0]
        span = core.t - t0
        if span > 0.0:
            ux, uy = core.ux, core.uy
            avg = ((core.x - x0) * ux + (core.y - y0) * uy) / span
            disp = math.hypot(core.x - x0, core.y - y0)
            if disp > 1e-9:
                cos_dev = ((core.x - x0) * math.cos(core.heading)
                           + (core.y - y0) * math.sin(core.heading)) / disp
                deviation = math.degrees(math.acos(max(-1.0, min(1.0, cos_dev))))
            else:
                deviation = None
        else:
            avg = 0.0
            deviation = None
        return {
            "type": "state",
            "protocol_version": PROTOCOL_VERSION,
            "t": core.t,
            "x": core.x,
            "y": core.y,
            "heading": core.heading,
            "s": core.s,
            "v_s": core.v_s,
            "avg_speed_window": avg,
            "deviation_deg": deviation,
        }

    @property
    def state(self) -> CapsuleState:
        return self._runner.state

    @property
    def t(self) -> float:
        return self._runner.t

    @property
    def command(self) -> DriveCommand:
        return self._runner.cmd

    # -- control ----------------------------------------------------------------

    def apply_control(self, msg: dict) -> dict:
        """Validate and apply a control message between steps.

        Returns an ack (or error) message.  The session state is untouched
        when the message is malformed.
        """
        try:
            applied = self._validate_and_apply(msg)
        except (ConfigError, ValueError) as exc:
            return {
                "type": "error",
                "protocol_version": PROTOCOL_VERSION,
                "ok": False,
                "message": str(exc),
                "field": getattr(exc, "field", None),
            }
        return {
            "type": "ack",
            "protocol_version": PROTOCOL_VERSION,
            "ok": True,
            "applied": applied,
            "t": self._runner.t,
        }

    def _validate_and_apply(self, msg: dict) -> dict:
        if not isinstance(msg, dict):
            raise ConfigError("<message>", "control message must be an object")
        if msg.get("type") != "control":
            raise ConfigError("type", f"expected 'control', got {msg.get('type')!r}")
        version = msg.get("protocol_version")
        if version != PROTOCOL_VERSION:
            raise ConfigError(
                "protocol_version",
                f"expected {PROTOCOL_VERSION}, got {version!r}",
            )
        unknown = set(msg) - _CONTROL_KEYS
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown control field")

        # Validate the full patch before mutating anything (atomicity).
        new_cmd = _drive_patch_from_control(msg, self._runner.cmd)
        applied: dict[str, Any] = {}
        if new_cmd is not None:
            self._runner.set_command(new_cmd)
            self._window.clear()
            self._record_window()
            applied["command"] = {
                "method": new_cmd.method.value,
                "frequency": new_cmd.frequency,
                "duty": new_cmd.duty,
                "direction": new_cmd.direction.value,
                "current": new_cmd.current_amplitude,
            }
        if msg.get("reset"):
            self._reset()
            applied["reset"] = True
        if msg.get("pause"):
            self.paused = True
            applied["paused"] = True
        if msg.get("resume"):
            self.paused = False
            applied["paused"] = False
        return applied

    def _reset(self) -> None:
        self._runner = self.model.runner(self.config.drive)
        self._epoch_t = self._runner.t
        self._tick_count = 0
        self._window.clear()
        self._record_window()

    # -- stepping ----------------------------------------------------------------

    def tick(self) -> dict:
        """Advance one telemetry interval (or heartbeat when paused).

        Queued controls are applied first, at the step boundary.  Returns
        the emitted state message.
        """
        while self._controls:
            msg, pending = self._controls.popleft()
            pending.resolve(self.apply_control(msg))
        if not self.paused:
            self._tick_count += 1
            self._runner.advance_to(self._epoch_t + self._tick_count * self._tick_dt)
            self._record_window()
        frame = self.state_message()
        encoded = json.dumps(frame, separators=(",", ":"))
        with self._lock:
            for sub in self._subscribers:
                sub.push(encoded)
        return frame

    def run_for(self, sim_seconds: float) -> None:
        """Advance synchronously by a whole number of telemetry ticks."""
        ticks = int(round(sim_seconds * self.telemetry_rate))
        for _ in range(ticks):
            self.tick()

    # -- subscriptions -------------------------------------------------------------

    def subscribe(self, *, capacity: int = 16) -> _Subscriber:
        sub = _Subscriber(capacity=capacity)
        with self._lock:
            self._subscribers.append(sub)
        self._last_client_seen = time.monotonic()
        return sub

    def unsubscribe(self, sub: _Subscriber) -> None:
        sub.close()
        with self._lock:
            if sub in self._subscribers:
                self._subscribers.remove(sub)
        self._last_client_seen = time.monotonic()

    def submit_control(self, msg: dict, timeout: float = 5.0) -> dict:
        """Queue a control for the worker loop and wait for the ack."""
        if self._thread is None or not self._thread.is_alive():
            return self.apply_control(msg)
        pending = _Pending()
        self._controls.append((msg, pending))
        return pending.wait(timeout)

    # -- worker ------------------------------------------------------------------

    def start(self) -> None:
        """Run the session on a paced worker thread (idempotent)."""
        if self._thread is not None and self._thread.is_alive():
            return
        self._stop.clear()
        self._thread = threading.Thread(
            target=self._worker, name=f"session-{self.id[:8]}", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    @property
    def running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def _worker(self) -> None:
        wall_interval = self._tick_dt / self.accel_factor
        next_wall = time.monotonic() + wall_interval
        while not self._stop.is_set():
            delay = next_wall - time.monotonic()
            if delay > 0:
                if self._stop.wait(delay):
                    break
            self.tick()
            next_wall += wall_interval
            # Never try to catch up by more than a few ticks; re-anchor instead.
            behind = time.monotonic() - next_wall
            if behind > 5.0 * wall_interval:
                next_wall = time.monotonic() + wall_interval
            if (
                self.idle_timeout is not None
                and not self._subscribers
                and self.controller is None
                and time.monotonic() - self._last_client_seen > self.idle_timeout
            ):
                break  # idle: no clients for longer than the timeout


class SessionManager:
    """Registry of live sessions."""

    def __init__(self, *, idle_timeout: float = 300.0) -> None:
        self.sessions: dict[str, Session] = {}
        self.idle_timeout = idle_timeout
        self._lock = threading.Lock()

    def create(
        self,
        config: SimConfig,
        *,
        accel_factor: float = 1.0,
        start: bool = True,
    ) -> Session:
        session = Session(
            config, accel_factor=accel_factor, idle_timeout=self.idle_timeout
        )
        with self._lock:
            self.sessions[session.id] = session
        if start:
            session.start()
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise SessionError(f"unknown session {session_id!r}") from None

    def close(self, session_id: str) -> None:
        with self._lock:
            session = self.sessions.pop(session_id, None)
        if session is not None:
            session.stop()

    def shutdown(self) -> None:
        for session_id in list(self.sessions):
            self.close(session_id)


class _Pending:
    """Reply slot for a queued control message."""

    def __init__(self) -> None:
        self._event = threading.Event()
        self._reply: dict | None = None

    def resolve(self, reply: dict) -> None:
        self._reply = reply
        self._event.set()

    def wait(self, timeout: float) -> dict:
        if not self._event.wait(timeout):
            return {
                "type": "error",
                "protocol_version": PROTOCOL_VERSION,
                "ok": False,
                "message": "control not applied before timeout",
                "field": None,
            }
        assert self._reply is not None
        return self._reply


# ---------------------------------------------------------------------------
# Web application
# ---------------------------------------------------------------------------


def create_app(
    manager: SessionManager | None = None,
    *,
    default_config: SimConfig | None = None,
    static_dir: str | None = None,
):
    """Build the FastAPI app serving sessions over REST + websocket.

    Routes:
        POST /sessions            create a session (JSON config overrides)
        GET  /sessions            list session ids
        GET  /sessions/{id}       session status snapshot
        WS   /ws/{id}             telemetry stream + control channel
        GET  /                    steering console (when assets are present)
    """
    manager = manager or SessionManager()
    app = FastAPI(title="capsulesim service")
    app.state.manager = manager

    @app.post("/sessions")
    async def create_session(overrides: dict | None = None):
        try:
            config = (
                config_from_dict(overrides)
                if overrides
                else (default_config or SimConfig())
            )
            session = await asyncio.to_thread(manager.create, config)
        except ConfigError as exc:
            return JSONResponse(
                status_code=422,
                content={"error": str(exc), "field": exc.field},
            )
        return {"session_id": session.id, "telemetry_rate": session.telemetry_rate}

    @app.get("/sessions")
    async def list_sessions():
        return {"sessions": sorted(manager.sessions)}

    @app.get("/sessions/{session_id}")
    async def session_status(session_id: str):
        try:
            session = manager.get(session_id)
        except SessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        cmd = session.command
        return {
            "session_id": session.id,
            "paused": session.paused,
            "t": session.t,
            "command": {
                "method": cmd.method.value,
                "frequency": cmd.frequency,
                "duty": cmd.duty,
                "direction": cmd.direction.value,
                "current": cmd.current_amplitude,
            },
        }

    @app.websocket("/ws/{session_id}")
    async def session_socket(ws: WebSocket, session_id: str):
        try:
            session = manager.get(session_id)
        except SessionError:
            await ws.close(code=4004, reason="unknown session")
            return
        await ws.accept()
        client_id = uuid.uuid4().hex
        is_controller = False
        if session.controller is None:
            session.controller = client_id
            is_controller = True
        subscriber = session.subscribe()

        async def pump_telemetry():
            while True:
                frame = await asyncio.to_thread(subscriber.pop, 0.25)
                if subscriber.closed:
                    return
                if frame is not None:
                    await ws.send_text(frame)

        pump = asyncio.create_task(pump_telemetry())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    reply = {
                        "type": "error",
                        "protocol_version": PROTOCOL_VERSION,
                        "ok": False,
                        "message": f"invalid JSON: {exc}",
                        "field": None,
                    }
                    await ws.send_text(json.dumps(reply, separators=(",", ":")))
                    continue
                if not is_controller:
                    reply = {
                        "type": "error",
                        "protocol_version": PROTOCOL_VERSION,
                        "ok": False,
                        "message": "read-only observer: another controller is live",
                        "field": None,
                    }
                else:
                    reply = await asyncio.to_thread(session.submit_control, msg)
                await ws.send_text(json.dumps(reply, separators=(",", ":")))
        except WebSocketDisconnect:
            pass
        finally:
            pump.cancel()
            session.unsubscribe(subscriber)
            if is_controller:
                session.controller = None

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
