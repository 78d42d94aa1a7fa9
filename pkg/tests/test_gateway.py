"""Operator gateway protocol: snapshots, error handling, mailbox semantics,
view frames, and message-log replay."""

import base64
import io
import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from sandbench.gateway import create_app, replay_messages
from sandbench.scenario import build_session, load_scenario
from sandbench.session import Phase, advance_phase, event_log_lines
from sandbench.view import render_view
from conftest import scenario_path

MARKER_PIXELS = [[200.8, 323.5], [336.1, 324.8], [337.0, 214.8], [201.7, 213.5]]


def quick_session(seed=3):
    doc = load_scenario(scenario_path("unstructured_demo.json"))
    return build_session(doc, seed_override=seed)


def wait_for(client_ws, msg_type, timeout=10.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        msg = client_ws.receive_json()
        if msg["type"] == msg_type:
            return msg
    raise TimeoutError(msg_type)


def test_initial_snapshot_and_sequence_numbers():
    app = create_app(quick_session(), speed=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            first = ws.receive_json()
            assert first["type"] == "state_snapshot"
            assert first["phase"] == "positioning"
            assert first["protocol_version"] == 1
            ws.send_text(json.dumps({"type": "request_snapshot"}))
            second = wait_for(ws, "state_snapshot")
            assert second["seq"] > first["seq"]
            assert second["session_id"] == first["session_id"]


def test_malformed_json_gets_error_reply_session_unaffected():
    app = create_app(quick_session(), speed=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text("{not json")
            reply = wait_for(ws, "error")
            assert "malformed" in reply["message"]
            assert app.state.gateway.session.phase is Phase.POSITIONING


def test_invalid_action_gets_error_reply():
    app = create_app(quick_session(), speed=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text(json.dumps({"type": "phase_action", "action": "start_execution"}))
            reply = wait_for(ws, "error")
            assert "not valid" in reply["message"]


def test_second_connection_rejected():
    app = create_app(quick_session(), speed=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws1:
            ws1.receive_json()
            with client.websocket_connect("/ws") as ws2:
                msg = ws2.receive_json()
                assert msg["type"] == "error"


def test_marker_update_refreshes_quad_and_preview():
    app = create_app(quick_session(), speed=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            for action in ("begin_scan", "scan_complete"):
                ws.send_text(json.dumps({"type": "phase_action", "action": action}))
            ws.send_text(json.dumps({"type": "marker_update", "pixels": MARKER_PIXELS}))
            deadline = time.time() + 10
            got = None
            while time.time() < deadline:
                snap = wait_for(ws, "state_snapshot")
                if snap["quad"] is not None:
                    got = snap
                    break
            assert got is not None
            assert len(got["quad"]) == 4
            assert len(got["reach_preview"]) > 0
            assert all(p["status"] in ("reachable", "unreachable") for p in got["reach_preview"])


def test_view_frame_over_socket():
    app = create_app(quick_session(), speed=5.0)
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text(json.dumps({"type": "request_view"}))
            frame = wait_for(ws, "view_frame")
            assert frame["projection"] in ("ortho", "camera")
            png = base64.b64decode(frame["png_base64"])
            assert png[:8] == b"\x89PNG\r\n\x1a\n"


def drive_live_session(app, stream_messages=40):
    """Connect, run the unstructured flow with a correction stream, then seal
    and export. Receiving snapshots between sends keeps the app's event loop
    (and therefore the tick task) running under the test portal."""
    with TestClient(app) as client:
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            for action in ("begin_scan", "scan_complete"):
                ws.send_text(json.dumps({"type": "phase_action", "action": action}))
            ws.send_text(json.dumps({"type": "marker_update", "pixels": MARKER_PIXELS}))
            ws.send_text(json.dumps({"type": "parameter_update",
                                     "params": {"passes": 1, "orientation": "horizontal",
                                                "force": 16.0, "feed": 60.0}}))
            ws.send_text(json.dumps({"type": "phase_action", "action": "start_execution"}))
            for i in range(stream_messages):
                axis = round(0.5 * np.sin(i / 3.0), 3)
                ws.send_text(json.dumps({"type": "correction_stream",
                                         "axes": [0.0, axis, 0.0, 0.0],
                                         "backtrack": False}))
                snap = wait_for(ws, "state_snapshot")
                if snap["phase"] == "complete":
                    break
        export = client.get("/export").json()
    return export


def test_correction_stream_mailbox_and_snapshot_rate():
    session = quick_session(seed=21)
    app = create_app(session, speed=3.0)
    export = drive_live_session(app)
    correction_events = [e for e in export["event_log"] if e["event"] == "correction"]
    # the streamed inputs were consumed via the latest-wins mailbox: multiple
    # distinct values took effect, all during Executing
    assert len(correction_events) > 3
    assert all(e["phase"] == "executing" for e in correction_events)
    msg_types = [r["message"]["type"] for r in export["message_log"]]
    assert msg_types.count("correction_stream") > 10


def test_live_session_replays_to_identical_event_log():
    live = create_app(quick_session(seed=33), speed=5.0)
    export = drive_live_session(live)
    fresh = quick_session(seed=33)
    replayed = replay_messages(fresh, export["message_log"])
    assert event_log_lines(replayed.event_log) == event_log_lines(export["event_log"])


def test_render_view_fresh_workpiece_uniform():
    session = quick_session()
    # executing-phase rendering is orthographic
    session.phase = Phase.EXECUTING
    frame = render_view(session)
    from PIL import Image
    img = np.asarray(Image.open(io.BytesIO(frame["png"])))
    assert img.std() == 0  # untouched coating renders at one intensity


def test_render_view_sanded_region_distinct():
    session = quick_session()
    session.grid.coating[20:60, 30:70] = 0.0
    session.phase = Phase.EXECUTING
    frame = render_view(session)
    from PIL import Image
    img = np.asarray(Image.open(io.BytesIO(frame["png"])))
    assert img.min() == 0 and img.max() > 200
    # bare area fraction matches the cleared cell fraction
    frac_img = float((img < 10).mean())
    frac_grid = float((session.grid.coating == 0).mean())
    assert frac_img == pytest.approx(frac_grid, rel=0.15)


def test_render_view_overlay_colors_follow_status():
    session = quick_session()
    advance_phase(session, "begin_scan")
    advance_phase(session, "scan_complete")
    advance_phase(session, "set_markers", {"pixels": MARKER_PIXELS})
    advance_phase(session, "start_execution")
    session.program.segments[0].status = session.program.segments[0].status  # touch
    frame = render_view(session)
    statuses = [s["status"] for s in frame["overlays"]["segments"]]
    assert statuses == [s.status.value for s in session.program.segments]
    colors = {s["status"]: s["color"] for s in frame["overlays"]["segments"]}
    mapping = {"completed": "gray", "reachable": "blue", "unreachable": "red"}
    for status, color in colors.items():
        assert mapping[status] == color
