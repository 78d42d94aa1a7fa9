"""Workflow state machines and the time-stepped execution engine.

One session owns the workpiece truth state, the task program, and the
sandpaper, and advances through the structured or unstructured workflow via
operator actions. During Executing, tick() folds operator corrections into
the nominal command (x = x_n + dx), tracks force with a first-order
compliance lag, applies material removal at the cursor, and advances the
progress cursor (backtrack-aware).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corrections import (CommandVector, CorrectionInput, SafetyBox, SaturationSet,
                          DEFAULT_COUPLING, arbitrate, backtrack_rate, map_correction)
from .errors import InvalidAction, ScriptPhaseMismatch
from .geometry import Pose, quat_from_rotvec, quat_multiply
from .kinematics import (JointConfig, ReachabilityStatus, RobotModel, camera_pose,
                         contact_pose, solve_ik)
from .perception import (CameraModel, PointCloud, RegistrationResult, apply_manual_adjustment,
                         auto_register, confirm_fit, simulate_scan)
from .programs import (MarkerSet, NominalParameters, SegmentStatus, TaskProgram,
                       generate_raster, project_markers, quad_cell_mask, reposition_object,
                       segment_reachability)
from .surface import (MaterialParams, SandpaperState, SurfaceGrid, ToolContact,
                      change_sandpaper, coverage_metrics, removal_step, wear_update)

TICK_DT = 0.01            # s
FORCE_TAU = 0.1           # s, compliance force-tracking constant
PROGRESS_LOG_EVERY = 100  # ticks between exec_progress events
MAX_EXECUTE_TICKS = 600_000


class Phase(Enum):
    POSITIONING = "positioning"
    SCANNING = "scanning"
    REGISTERING = "registering"
    REACHABILITY_REVIEW = "reachability_review"
    EXECUTING = "executing"
    PAUSED = "paused"
    SANDPAPER_CHANGE = "sandpaper_change"
    REPOSITIONING = "repositioning"
    COMPLETE = "complete"


class WorkflowKind(Enum):
    STRUCTURED = "structured"
    UNSTRUCTURED = "unstructured"


@dataclass
class Session:
    workflow: WorkflowKind
    robot: RobotModel
    grid: SurfaceGrid
    material: MaterialParams
    camera: CameraModel
    pan_configs: list[JointConfig]
    view_config: JointConfig
    noise_sigma: float
    seed: int
    registration_init_offset: Pose = field(default_factory=Pose.identity)
    structured_library: dict = field(default_factory=dict)
    structured_geometry_id: str | None = None
    saturation: SaturationSet = field(default_factory=SaturationSet)
    coupling: tuple = DEFAULT_COUPLING
    safety_box: SafetyBox = field(default_factory=SafetyBox)

    phase: Phase = Phase.POSITIONING
    program: TaskProgram | None = None
    registration: RegistrationResult | None = None
    cloud: PointCloud | None = None
    quad: np.ndarray | None = None
    params: NominalParameters = field(default_factory=NominalParameters)
    reach_preview: list = field(default_factory=list)
    paper: SandpaperState = field(default_factory=SandpaperState.fresh)
    cursor_segment: int = 0
    cursor_s: float = 0.0
    tracked_force: float = 0.0
    clock: float = 0.0
    episode: int = 0
    event_log: list = field(default_factory=list)
    scan_count: int = 0
    tick_count: int = 0
    last_logged_correction: tuple | None = None

    # -- logging ------------------------------------------------------------

    def log(self, event: str, **payload) -> None:
        rec = {"t": round(self.clock, 9), "phase": self.phase.value, "event": event}
        rec.update(payload)
        self.event_log.append(rec)

    def _set_phase(self, phase: Phase) -> None:
        old = self.phase
        self.phase = phase
        self.log("phase_change", from_phase=old.value, to_phase=phase.value)

    # -- snapshot for UI/protocol --------------------------------------------

    def snapshot(self) -> dict:
        cov = coverage_metrics(self.grid, self.material)
        snap = {
            "workflow": self.workflow.value,
            "phase": self.phase.value,
            "clock": round(self.clock, 9),
            "cursor": {"segment": self.cursor_segment, "s": self.cursor_s},
            "sandpaper": {"usage_seconds": self.paper.usage_seconds,
                          "efficiency": self.paper.efficiency},
            "coverage": cov.to_dict(),
            "segment_statuses": [s.status.value for s in self.program.segments] if self.program else [],
            "registration": self.registration.scores() if self.registration else None,
            "quad": self.quad.tolist() if self.quad is not None else None,
            "params": self.params.to_dict(),
            "reach_preview": [
                {"u": float(u), "v": float(v), "status": st.value}
                for (u, v, st) in self.reach_preview
            ],
            "tracked_force": self.tracked_force,
        }
        return snap


def _registration_init(session: Session) -> Pose:
    off = session.registration_init_offset
    true_pose = session.grid.object_pose
    return Pose(true_pose.position + off.position,
                quat_multiply(off.quat, true_pose.quat))


def _perform_scan(session: Session) -> None:
    session.scan_count += 1
    cloud = simulate_scan(session.robot, session.grid, session.pan_configs,
                          session.noise_sigma, session.seed + session.scan_count,
                          session.camera)
    session.cloud = cloud
    session.log("scan", points=len(cloud), scan_index=session.scan_count)


def _auto_register(session: Session, init: Pose | None = None) -> None:
    init_pose = init if init is not None else _registration_init(session)
    session.registration = auto_register(session.cloud, session.grid, init_pose)
    session.log("registration", **session.registration.scores(),
                iterations=len(session.registration.residual_history))


def _first_reachable(program: TaskProgram, start: int = 0) -> int | None:
    for i in range(start, len(program.segments)):
        if program.segments[i].status is SegmentStatus.REACHABLE:
            return i
    return None


def _bind_confirmed_registration(session: Session) -> None:
    reposition_object(session.program, session.registration)
    segment_reachability(session.program, session.robot, session.grid)
    session.log("reachability", **session.program.counts())


def _refresh_marker_preview(session: Session) -> None:
    """Green/red reachability grid over the marker quad. Threads the last
    successful IK solution as a warm-start seed so the grid refreshes at
    interactive latency while markers are dragged."""
    quad = session.quad
    umin, vmin = quad.min(axis=0)
    umax, vmax = quad.max(axis=0)
    pts = [(u, v)
           for u in np.linspace(umin, umax, 5)
           for v in np.linspace(vmin, vmax, 3)]
    default_seeds = session.robot.default_seeds()
    warm = None
    preview = []
    for u, v in pts:
        p, n = session.grid.point_normal_world(np.array([u]), np.array([v]))
        pose = contact_pose(p[0], n[0])
        status = ReachabilityStatus.UNREACHABLE
        for seed in ([warm] if warm is not None else []) + default_seeds:
            sol = solve_ik(session.robot, pose, seed)
            if sol is not None:
                status = ReachabilityStatus.REACHABLE
                warm = sol
                break
        preview.append((u, v, status))
    session.reach_preview = preview
    session.log("reach_preview",
                reachable=sum(1 for _, _, s in session.reach_preview if s.value == "reachable"),
                total=len(session.reach_preview))


def _start_execution(session: Session) -> None:
    if session.workflow is WorkflowKind.UNSTRUCTURED:
        if session.quad is None:
            raise InvalidAction(session.phase.value, "start_execution (no markers set)")
        session.program = generate_raster(session.quad, session.params, session.grid,
                                          session.material.disc_radius)
        session.grid.target_mask = quad_cell_mask(session.grid, session.quad)
        segment_reachability(session.program, session.robot, session.grid)
        session.log("program_generated", segments=len(session.program.segments),
                    **session.program.counts())
    if session.program is None:
        raise InvalidAction(session.phase.value, "start_execution (no program)")
    first = _first_reachable(session.program)
    if first is None:
        session._set_phase(Phase.COMPLETE)
        session.log("execution_skipped", reason="no reachable segments")
        return
    session.episode += 1
    session.cursor_segment = first
    session.cursor_s = 0.0
    session._set_phase(Phase.EXECUTING)
    session.log("execution_start", episode=session.episode, segment=first)


def advance_phase(session: Session, action: str, payload: dict | None = None) -> Session:
    """Apply an operator action to the workflow state machine. Actions not
    valid in the current phase raise InvalidAction rather than being ignored."""
    payload = payload or {}
    phase = session.phase
    kind = session.workflow
    session.log("action", action=action)

    if phase is Phase.POSITIONING:
        if action == "begin_scan":
            session._set_phase(Phase.SCANNING)
            _perform_scan(session)
            return session

    elif phase is Phase.SCANNING:
        if action == "scan_complete":
            if kind is WorkflowKind.STRUCTURED:
                session._set_phase(Phase.REGISTERING)
                init = Pose.from_dict(payload["init_pose"]) if "init_pose" in payload else None
                _auto_register(session, init)
            else:
                # markers replace registration in the unstructured workflow
                session._set_phase(Phase.REACHABILITY_REVIEW)
            return session

    elif phase is Phase.REGISTERING:
        if action == "auto_register":
            init = Pose.from_dict(payload["init_pose"]) if "init_pose" in payload else None
            _auto_register(session, init)
            return session
        if action == "nudge":
            delta = Pose(np.array(payload.get("translation", [0, 0, 0]), dtype=float),
                         quat_from_rotvec(np.array(payload.get("rotation", [0, 0, 0]), dtype=float)))
            session.registration = apply_manual_adjustment(session.registration, delta)
            session.log("nudge", **session.registration.scores())
            return session
        if action == "confirm_fit":
            session.registration = confirm_fit(session.registration)
            session.log("fit_confirmed", **session.registration.scores())
            _bind_confirmed_registration(session)
            session._set_phase(Phase.REACHABILITY_REVIEW)
            return session

    elif phase is Phase.REACHABILITY_REVIEW:
        if action == "set_markers" and kind is WorkflowKind.UNSTRUCTURED:
            markers = MarkerSet(np.array(payload["pixels"], dtype=float))
            cam = camera_pose(session.robot, session.view_config)
            session.quad = project_markers(markers, session.camera, cam, session.grid)
            session.log("markers_set", quad=session.quad.tolist())
            _refresh_marker_preview(session)
            return session
        if action == "set_parameters" and kind is WorkflowKind.UNSTRUCTURED:
            session.params = NominalParameters.from_dict(payload)
            session.log("params_set", **session.params.to_dict())
            return session
        if action == "start_execution":
            _start_execution(session)
            return session
        if action == "reposition" and kind is WorkflowKind.STRUCTURED:
            session._set_phase(Phase.REPOSITIONING)
            return session

    elif phase is Phase.EXECUTING:
        if action == "pause":
            session._set_phase(Phase.PAUSED)
            return session
        if action == "request_sandpaper_change":
            session._set_phase(Phase.SANDPAPER_CHANGE)
            session.log("sandpaper_change_start", usage=session.paper.usage_seconds)
            return session

    elif phase is Phase.PAUSED:
        if action == "resume":
            session._set_phase(Phase.EXECUTING)
            return session
        if action == "request_sandpaper_change":
            session._set_phase(Phase.SANDPAPER_CHANGE)
            session.log("sandpaper_change_start", usage=session.paper.usage_seconds)
            return session

    elif phase is Phase.SANDPAPER_CHANGE:
        if action == "sandpaper_changed":
            session.paper = change_sandpaper(session.paper)
            session.log("sandpaper_change_end", efficiency=session.paper.efficiency)
            session._set_phase(Phase.EXECUTING)
            return session

    elif phase is Phase.REPOSITIONING:
        if action == "workpiece_moved":
            new_pose = Pose.from_dict(payload["pose"])
            session.grid.object_pose = new_pose
            session.log("workpiece_moved", pose=new_pose.to_dict())
            session._set_phase(Phase.POSITIONING)
            return session

    elif phase is Phase.COMPLETE:
        if action == "reposition" and kind is WorkflowKind.STRUCTURED:
            session._set_phase(Phase.REPOSITIONING)
            return session
        if action == "adjust" and kind is WorkflowKind.UNSTRUCTURED:
            session._set_phase(Phase.REACHABILITY_REVIEW)
            return session

    raise InvalidAction(phase.value, action)


def request_sandpaper_change(session: Session) -> Session:
    return advance_phase(session, "request_sandpaper_change")


def _true_contact_uv(session: Session, uv_est: np.ndarray) -> np.ndarray:
    """Map the program-frame surface point to true-workpiece coordinates;
    registration error shows up here as a small sanding offset."""
    geometry = session.grid
    p_local, _ = geometry.point_normal_local(np.array([uv_est[0]]), np.array([uv_est[1]]))
    world = session.program.object_pose.transform_points(p_local)[0]
    local_true = geometry.object_pose.inverse().transform_point(world)
    u, v = geometry.project_uv(local_true[None, :])
    eps = 1e-9
    u = float(np.clip(u[0], -geometry.extent_u / 2 + eps, geometry.extent_u / 2 - eps))
    v = float(np.clip(v[0], -geometry.extent_v / 2 + eps, geometry.extent_v / 2 - eps))
    return np.array([u, v])


def _finalize_segment(session: Session, index: int) -> None:
    seg = session.program.segments[index]
    seg.status = SegmentStatus.COMPLETED
    seg.completed_episode = session.episode
    session.log("segment_completed", segment=index)


def _revert_segment(session: Session, index: int) -> None:
    seg = session.program.segments[index]
    seg.status = SegmentStatus.REACHABLE
    seg.completed_episode = None
    session.log("segment_reverted", segment=index)


def _advance_cursor(session: Session, rate_mm_s: float, dt: float) -> None:
    program = session.program
    session.cursor_s += (rate_mm_s / 1000.0) * dt

    # forward: finalize crossed segments, skip unreachable/completed ones
    while session.cursor_s >= program.segments[session.cursor_segment].length:
        overshoot = session.cursor_s - program.segments[session.cursor_segment].length
        _finalize_segment(session, session.cursor_segment)
        nxt = _first_reachable(program, session.cursor_segment + 1)
        if nxt is None:
            nxt = _first_reachable(program)   # reverted segments behind the cursor
        if nxt is None:
            session._set_phase(Phase.COMPLETE)
            session.log("execution_complete", episode=session.episode)
            session.cursor_s = program.segments[session.cursor_segment].length
            return
        session.cursor_segment = nxt
        session.cursor_s = overshoot

    # backward: re-enter segments completed this episode, hold otherwise
    while session.cursor_s < 0.0:
        prev = None
        for i in range(session.cursor_segment - 1, -1, -1):
            seg = program.segments[i]
            if seg.status is SegmentStatus.UNREACHABLE:
                continue
            if seg.status is SegmentStatus.COMPLETED and seg.completed_episode == session.episode:
                prev = i
            break
        if prev is None:
            session.cursor_s = 0.0
            return
        _revert_segment(session, prev)
        session.cursor_segment = prev
        session.cursor_s = program.segments[prev].length + session.cursor_s


def tick(session: Session, correction: CorrectionInput, dt: float) -> Session:
    """One execution step: arbitration (x = x_n + dx), compliance force
    tracking, material removal at the cursor, wear, cursor advance."""
    if session.phase is not Phase.EXECUTING:
        raise ValueError(f"tick requires Executing phase, got {session.phase.value}")
    if not (0.0 < dt <= 0.05):
        raise ValueError("dt must be in (0, 50 ms]")

    program = session.program
    seg = program.segments[session.cursor_segment]
    nominal = seg.nominal
    x_n = CommandVector(feed_scale=1.0, force=nominal.force,
                        pitch=nominal.pitch, lateral_offset=0.0)
    dx = map_correction(correction, session.saturation, session.coupling)
    x = arbitrate(x_n, dx, session.safety_box)

    key = (correction.coupled, correction.axes, correction.backtrack)
    if key != session.last_logged_correction:
        session.last_logged_correction = key
        session.log("correction", coupled=correction.coupled,
                    axes=list(correction.axes) if correction.axes else None,
                    backtrack=correction.backtrack)

    session.tracked_force += (x.force - session.tracked_force) * dt / FORCE_TAU

    rate = backtrack_rate(correction, nominal.feed, x.feed_scale)

    uv_est = seg.point_at(session.cursor_s)
    perp = np.array([-seg.tangent_uv[1], seg.tangent_uv[0]])
    uv_est = uv_est + perp * (x.lateral_offset / 1000.0)
    center = _true_contact_uv(session, uv_est)
    travel = seg.tangent_uv if rate >= 0 else -seg.tangent_uv
    contact = ToolContact(center_uv=center, normal_force=max(0.0, session.tracked_force),
                          tangential_speed=abs(rate), pitch=x.pitch,
                          engaged=True, travel_uv=travel)
    removal_step(session.grid, contact, session.paper, dt, session.material)
    session.paper = wear_update(session.paper, dt, True, session.material)

    session.clock += dt
    session.tick_count += 1
    _advance_cursor(session, rate, dt)

    if session.tick_count % PROGRESS_LOG_EVERY == 0 and session.phase is Phase.EXECUTING:
        session.log("exec_progress", segment=session.cursor_segment,
                    s=round(session.cursor_s, 6),
                    force=round(session.tracked_force, 6),
                    paper_usage=round(session.paper.usage_seconds, 6))
    return session


# -- scripted episodes -------------------------------------------------------


def _correction_from_spec(spec: dict) -> CorrectionInput:
    backtrack = bool(spec.get("backtrack", False))
    if "coupled" in spec:
        return CorrectionInput.coupled_input(float(spec["coupled"]), backtrack)
    if "axes" in spec:
        return CorrectionInput.independent([float(a) for a in spec["axes"]], backtrack)
    return CorrectionInput(axes=(0.0, 0.0, 0.0, 0.0), backtrack=backtrack)


def _run_execute_block(session: Session, step: dict) -> None:
    if session.phase is not Phase.EXECUTING:
        raise ScriptPhaseMismatch(f"'execute' block in phase {session.phase.value}")
    duration = step.get("duration")
    windows = step.get("corrections", [])
    idle = CorrectionInput.idle()
    t0 = session.clock
    ticks = 0
    while session.phase is Phase.EXECUTING and ticks < MAX_EXECUTE_TICKS:
        t_rel = session.clock - t0
        if duration is not None and t_rel >= duration - 1e-12:
            break
        active = idle
        for w in windows:
            if w.get("start", 0.0) <= t_rel < w.get("end", float("inf")):
                active = _correction_from_spec(w)
        tick(session, active, TICK_DT)
        ticks += 1


def run_script_step(session: Session, step: dict) -> None:
    action = step["action"]
    if action == "execute":
        _run_execute_block(session, step)
        return
    try:
        advance_phase(session, action, step.get("payload"))
    except InvalidAction as e:
        raise ScriptPhaseMismatch(str(e)) from e


def run_headless(session: Session, operator_script: list[dict]):
    """Deterministic scripted episode: phase actions plus time-indexed
    correction windows. Returns (metrics, event_log, session)."""
    session.log("session_start", workflow=session.workflow.value, seed=session.seed)
    for step in operator_script:
        run_script_step(session, step)
    metrics = coverage_metrics(session.grid, session.material)
    session.log("session_end", **metrics.to_dict())
    return metrics, session.event_log, session


def event_log_lines(event_log: list[dict]) -> str:
    return "\n".join(json.dumps(e, sort_keys=True) for e in event_log) + "\n"


def metrics_document(session: Session) -> dict:
    metrics = coverage_metrics(session.grid, session.material)
    return {
        "coverage": metrics.to_dict(),
        "clock": round(session.clock, 9),
        "ticks": session.tick_count,
        "episodes": session.episode,
        "sandpaper": {"usage_seconds": session.paper.usage_seconds,
                      "efficiency": session.paper.efficiency},
        "segments": session.program.counts() if session.program else {},
        "events": len(session.event_log),
    }
