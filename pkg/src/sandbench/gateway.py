"""Operator gateway: a websocket service streaming state snapshots and view
frames while accepting phase actions, marker/parameter edits, pose nudges,
and correction streams.

Every client message is recorded with the simulated clock at which it was
applied, so a recorded session replays headless to an identical event log.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import uuid

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware

from .corrections import CorrectionInput, CorrectionMailbox
from .errors import SandbenchError
from .session import Phase, Session, TICK_DT, advance_phase, metrics_document, tick
from .view import view_frame_message

PROTOCOL_VERSION = 1
SNAPSHOT_INTERVAL = 0.05      # s wall time: >= 20 Hz during execution
TICK_LOOP_INTERVAL = 0.02     # s wall time between tick batches; client
                              # messages apply between batches, so finer
                              # batches keep streamed corrections observable
                              # above the snapshot rate


def _correction_from_message(msg: dict) -> CorrectionInput:
    backtrack = bool(msg.get("backtrack", False))
    if msg.get("coupled") is not None:
        return CorrectionInput.coupled_input(float(msg["coupled"]), backtrack)
    axes = msg.get("axes") or (0.0, 0.0, 0.0, 0.0)
    return CorrectionInput.independent([float(a) for a in axes], backtrack)


class Gateway:
    """One session per process; one operator connection at a time."""

    def __init__(self, session: Session, speed: float = 1.0):
        self.session = session
        self.speed = speed
        self.mailbox = CorrectionMailbox()
        self.session_id = uuid.uuid4().hex[:12]
        self.seq = 0
        self.message_log: list[dict] = []
        self.connected = False
        self._stop = False

    # -- outgoing ------------------------------------------------------------

    def _envelope(self, msg_type: str, body: dict) -> dict:
        self.seq += 1
        return {"type": msg_type, "seq": self.seq, "session_id": self.session_id,
                "protocol_version": PROTOCOL_VERSION, **body}

    def snapshot_message(self) -> dict:
        return self._envelope("state_snapshot", self.session.snapshot())

    def view_message(self) -> dict:
        return self._envelope("view_frame", view_frame_message(self.session))

    def error_message(self, text: str) -> dict:
        return self._envelope("error", {"message": text})

    # -- incoming ------------------------------------------------------------

    def record(self, message: dict) -> None:
        self.message_log.append({"applied_at": round(self.session.clock, 9),
                                 "tick": self.session.tick_count,
                                 "message": message})

    def apply_client_message(self, message: dict) -> dict | None:
        """Apply one client message; returns an error reply or None."""
        msg_type = message.get("type")
        try:
            if msg_type == "correction_stream":
                self.record(message)
                self.mailbox.post(_correction_from_message(message))
                return None
            if msg_type == "phase_action":
                self.record(message)
                advance_phase(self.session, message["action"], message.get("payload"))
                return None
            if msg_type == "marker_update":
                self.record(message)
                advance_phase(self.session, "set_markers", {"pixels": message["pixels"]})
                return None
            if msg_type == "parameter_update":
                self.record(message)
                advance_phase(self.session, "set_parameters", message["params"])
                return None
            if msg_type == "pose_nudge":
                self.record(message)
                advance_phase(self.session, "nudge",
                              {"translation": message.get("translation", [0, 0, 0]),
                               "rotation": message.get("rotation", [0, 0, 0])})
                return None
            if msg_type in ("request_snapshot", "request_view"):
                return None  # handled by caller
            return self.error_message(f"unknown message type {msg_type!r}")
        except (SandbenchError, KeyError, ValueError, TypeError) as e:
            return self.error_message(str(e))

    def run_pending_ticks(self, n: int) -> None:
        """Advance the simulation n ticks using the latest correction."""
        for _ in range(n):
            if self.session.phase is not Phase.EXECUTING:
                return
            tick(self.session, self.mailbox.latest(), TICK_DT)

    def seal(self) -> None:
        """Freeze the session and mark the end of the recorded message log;
        replay runs exactly up to this point."""
        self._stop = True
        if self.message_log and self.message_log[-1]["message"].get("type") == "_end":
            return
        self.record({"type": "_end"})


def create_app(session: Session, speed: float = 1.0) -> FastAPI:
    gw = Gateway(session, speed)

    async def tick_loop():
        per_batch = max(1, round(gw.speed * TICK_LOOP_INTERVAL / TICK_DT))
        while not gw._stop:
            gw.run_pending_ticks(per_batch)
            await asyncio.sleep(TICK_LOOP_INTERVAL)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(tick_loop())
        yield
        gw._stop = True
        task.cancel()

    app = FastAPI(lifespan=lifespan)
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    app.state.gateway = gw

    @app.get("/metrics")
    def metrics():
        return metrics_document(gw.session)

    @app.get("/event_log")
    def event_log():
        return gw.session.event_log

    @app.get("/export")
    def export():
        """Seal the session and return the replayable record of it."""
        gw.seal()
        return {"message_log": gw.message_log,
                "event_log": gw.session.event_log,
                "metrics": metrics_document(gw.session)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if gw.connected:
            await ws.send_json(gw.error_message("session already has an operator"))
            await ws.close()
            return
        gw.connected = True
        last_snapshot = None
        streamer = None
        try:
            await ws.send_json(gw.snapshot_message())

            # snapshots stream at >= 20 Hz wall time while executing even if
            # the simulation itself is slowed down
            stream_interval = SNAPSHOT_INTERVAL / max(1.0, gw.speed)

            async def stream_snapshots():
                nonlocal last_snapshot
                while True:
                    snap = gw.session.snapshot()
                    if gw.session.phase is Phase.EXECUTING or snap != last_snapshot:
                        last_snapshot = snap
                        await ws.send_json(gw._envelope("state_snapshot", snap))
                    await asyncio.sleep(stream_interval)

            streamer = asyncio.create_task(stream_snapshots())
            while True:
                raw = await ws.receive_text()
                try:
                    message = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_json(gw.error_message("malformed JSON"))
                    continue
                if message.get("type") == "request_snapshot":
                    await ws.send_json(gw.snapshot_message())
                    continue
                if message.get("type") == "request_view":
                    await ws.send_json(gw.view_message())
                    continue
                reply = gw.apply_client_message(message)
                if reply is not None:
                    await ws.send_json(reply)
        except WebSocketDisconnect:
            pass
        finally:
            gw.connected = False
            if streamer is not None:
                streamer.cancel()

    return app


def replay_messages(session: Session, message_log: list[dict]) -> Session:
    """Re-run a recorded operator session headless: each message is applied at
    the simulated clock it originally took effect, with the tick loop driven
    by mailbox semantics in between."""
    mailbox = CorrectionMailbox()

    def run_until(clock: float) -> None:
        while (session.phase is Phase.EXECUTING
               and session.clock < clock - TICK_DT / 2.0):
            tick(session, mailbox.latest(), TICK_DT)

    for rec in message_log:
        run_until(float(rec["applied_at"]))
        message = rec["message"]
        msg_type = message.get("type")
        if msg_type == "_end":
            break
        if msg_type == "correction_stream":
            mailbox.post(_correction_from_message(message))
        elif msg_type == "phase_action":
            advance_phase(session, message["action"], message.get("payload"))
        elif msg_type == "marker_update":
            advance_phase(session, "set_markers", {"pixels": message["pixels"]})
        elif msg_type == "parameter_update":
            advance_phase(session, "set_parameters", message["params"])
        elif msg_type == "pose_nudge":
            advance_phase(session, "nudge",
                          {"translation": message.get("translation", [0, 0, 0]),
                           "rotation": message.get("rotation", [0, 0, 0])})
    if message_log:
        run_until(float(message_log[-1]["applied_at"]))
    return session
