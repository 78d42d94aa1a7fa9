"""Workpiece view rendering for the operator console: coating thickness as
image intensity plus overlay geometry (markers, reachability points, path
segments) as structured vector data the client draws itself."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .geometry import Pose
from .kinematics import camera_pose
from .perception import CameraModel, intersect_rays
from .programs import SegmentStatus
from .session import Phase, Session, WorkflowKind

ORTHO_WIDTH_PX = 480

STATUS_COLORS = {
    SegmentStatus.COMPLETED.value: "gray",
    SegmentStatus.REACHABLE.value: "blue",
    SegmentStatus.UNREACHABLE.value: "red",
}
REACH_COLORS = {"reachable": "green", "unreachable": "red"}


def _png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _coating_intensity(session: Session) -> np.ndarray:
    ref = float(session.grid.initial_coating.max())
    if ref <= 0:
        ref = 1.0
    return np.clip(session.grid.coating / ref, 0.0, 1.0) * 255.0


def _ortho_frame(session: Session) -> dict:
    grid = session.grid
    scale = ORTHO_WIDTH_PX / grid.extent_u
    height = max(2, int(round(grid.extent_v * scale)))
    intensity = _coating_intensity(session)

    # image rows sweep v downward, columns sweep u rightward
    iu = np.minimum((np.arange(ORTHO_WIDTH_PX) / scale / grid.cell_size).astype(int), grid.nu - 1)
    iv = np.minimum((np.arange(height) / scale / grid.cell_size).astype(int), grid.nv - 1)
    img = intensity[np.ix_(iu, iv[::-1])].T

    def uv_to_px(u, v):
        return [(u + grid.extent_u / 2.0) * scale, (grid.extent_v / 2.0 - v) * scale]

    overlays = {"segments": [], "reach_points": [], "markers": [],
                "uv_bounds": [-grid.extent_u / 2, -grid.extent_v / 2,
                              grid.extent_u / 2, grid.extent_v / 2]}
    if session.program is not None:
        for seg in session.program.segments:
            overlays["segments"].append({
                "status": seg.status.value,
                "color": STATUS_COLORS[seg.status.value],
                "polyline": [uv_to_px(u, v) for u, v in seg.waypoints_uv],
            })
    for (u, v, st) in session.reach_preview:
        overlays["reach_points"].append(
            {"xy": uv_to_px(u, v), "status": st.value, "color": REACH_COLORS[st.value]})
    if session.quad is not None:
        overlays["markers"] = [uv_to_px(u, v) for u, v in session.quad]
    return {"projection": "ortho", "width": ORTHO_WIDTH_PX, "height": height,
            "png": _png_bytes(img), "overlays": overlays}


def project_to_pixels(camera: CameraModel, cam_pose: Pose, world_points: np.ndarray) -> np.ndarray:
    """Inverse of the pinhole ray map: world points to pixel coordinates."""
    local = cam_pose.inverse().transform_points(np.asarray(world_points, dtype=float))
    z = np.where(np.abs(local[:, 2]) < 1e-12, 1e-12, local[:, 2])
    px = ((local[:, 0] / z) / np.tan(camera.fov_x / 2.0) + 1.0) * camera.width / 2.0 - 0.5
    py = ((local[:, 1] / z) / np.tan(camera.fov_y / 2.0) + 1.0) * camera.height / 2.0 - 0.5
    return np.stack([px, py], axis=-1)


def _camera_frame(session: Session) -> dict:
    cam = session.camera
    cam_pose = camera_pose(session.robot, session.view_config)
    stride = max(cam.stride, 2)
    xs = np.arange(0, cam.width, stride)
    ys = np.arange(0, cam.height, stride)
    px, py = np.meshgrid(xs, ys, indexing="ij")
    dirs_cam = cam.pixel_rays(px.ravel(), py.ravel())
    origins = np.broadcast_to(cam_pose.position, dirs_cam.shape).copy()
    dirs = cam_pose.rotate_many(dirs_cam)
    t = intersect_rays(session.grid, origins, dirs, cam.range_min, cam.range_max)

    img = np.zeros(len(xs) * len(ys))
    hit = ~np.isnan(t)
    if np.any(hit):
        pts = origins[hit] + t[hit][:, None] * dirs[hit]
        local = session.grid.object_pose.inverse().transform_points(pts)
        u, v, _ = session.grid.closest_uv(local)
        iu = np.clip(((u + session.grid.extent_u / 2) / session.grid.cell_size).astype(int),
                     0, session.grid.nu - 1)
        iv = np.clip(((v + session.grid.extent_v / 2) / session.grid.cell_size).astype(int),
                     0, session.grid.nv - 1)
        intensity = _coating_intensity(session)
        img[np.flatnonzero(hit)] = intensity[iu, iv]
    img = img.reshape(len(xs), len(ys)).T

    overlays = {"segments": [], "reach_points": [], "markers": [],
                "pixel_stride": stride, "camera_size": [cam.width, cam.height]}

    def world_uv_to_px(u, v):
        p, _ = session.grid.point_normal_world(np.array([u]), np.array([v]))
        px = project_to_pixels(cam, cam_pose, p)[0]
        return [float(px[0]) / stride, float(px[1]) / stride]

    for (u, v, st) in session.reach_preview:
        overlays["reach_points"].append(
            {"xy": world_uv_to_px(u, v), "status": st.value, "color": REACH_COLORS[st.value]})
    if session.quad is not None:
        overlays["markers"] = [world_uv_to_px(u, v) for u, v in session.quad]
    if session.program is not None:
        for seg in session.program.segments:
            overlays["segments"].append({
                "status": seg.status.value,
                "color": STATUS_COLORS[seg.status.value],
                "polyline": [world_uv_to_px(u, v) for u, v in seg.waypoints_uv[::4]],
            })
    return {"projection": "camera", "width": len(xs), "height": len(ys),
            "png": _png_bytes(img), "overlays": overlays}


def render_view(session: Session) -> dict:
    """Rendered workpiece frame. Marker phases use the robot camera
    projection (so marker pixels land where the operator points); everything
    else uses the orthographic coating map."""
    if (session.workflow is WorkflowKind.UNSTRUCTURED
            and session.phase in (Phase.POSITIONING, Phase.SCANNING, Phase.REACHABILITY_REVIEW)):
        return _camera_frame(session)
    return _ortho_frame(session)


def view_frame_message(session: Session) -> dict:
    frame = render_view(session)
    return {
        "projection": frame["projection"],
        "width": frame["width"],
        "height": frame["height"],
        "png_base64": base64.b64encode(frame["png"]).decode("ascii"),
        "overlays": frame["overlays"],
    }
