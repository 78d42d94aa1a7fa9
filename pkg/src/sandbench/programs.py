"""Robot sanding behaviors: stored structured task models and the
marker-bounded raster generator, plus per-segment reachability coloring.

Paths live in object-frame surface coordinates; world waypoint poses are
derived through the program's object pose so completion memory survives
workpiece repositioning.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateQuad, MarkerOffSurface, UnconfirmedRegistration, UnknownGeometry
from .geometry import Pose
from .kinematics import RobotModel, contact_pose, is_reachable, ReachabilityStatus
from .perception import CameraModel, RegistrationResult, intersect_rays
from .surface import SurfaceGrid

WAYPOINT_SPACING = 0.025   # m along a lane


class SegmentStatus(Enum):
    COMPLETED = "completed"      # gray
    REACHABLE = "reachable"      # blue (also the unchecked placeholder)
    UNREACHABLE = "unreachable"  # red


class Orientation(Enum):
    HORIZONTAL = "horizontal"    # lanes run along the u axis
    VERTICAL = "vertical"        # lanes run along the v axis


class ProgramSource(Enum):
    STRUCTURED_MODEL = "structured_model"
    UNSTRUCTURED_SPEC = "unstructured_spec"


@dataclass(frozen=True)
class NominalParameters:
    passes: int = 2
    orientation: Orientation = Orientation.HORIZONTAL
    force: float = 15.0      # N
    feed: float = 50.0       # mm/s
    pitch: float = 0.0       # rad

    def __post_init__(self):
        if not (1 <= self.passes <= 10):
            raise ValueError("passes must be in [1, 10]")
        if not (1.0 <= self.force <= 40.0):
            raise ValueError("force must be in [1, 40] N")
        if not (10.0 <= self.feed <= 200.0):
            raise ValueError("feed must be in [10, 200] mm/s")
        if abs(self.pitch) > 0.15:
            raise ValueError("|pitch| must be <= 0.15 rad")

    def to_dict(self) -> dict:
        return {"passes": self.passes, "orientation": self.orientation.value,
                "force": self.force, "feed": self.feed, "pitch": self.pitch}

    @staticmethod
    def from_dict(d: dict) -> "NominalParameters":
        return NominalParameters(passes=int(d.get("passes", 2)),
                                 orientation=Orientation(d.get("orientation", "horizontal")),
                                 force=float(d.get("force", 15.0)),
                                 feed=float(d.get("feed", 50.0)),
                                 pitch=float(d.get("pitch", 0.0)))


@dataclass
class PathSegment:
    """One raster lane: ordered surface waypoints with a shared tangent
    direction and nominal parameters."""

    waypoints_uv: np.ndarray          # (k, 2), k >= 2
    tangent_uv: np.ndarray            # (2,) unit, direction of travel
    nominal: NominalParameters
    status: SegmentStatus = SegmentStatus.REACHABLE
    completed_episode: int | None = None

    def __post_init__(self):
        w = np.asarray(self.waypoints_uv, dtype=float).reshape(-1, 2)
        if w.shape[0] < 2:
            raise ValueError("segment needs at least 2 waypoints")
        t = np.asarray(self.tangent_uv, dtype=float)
        self.waypoints_uv = w
        self.tangent_uv = t / np.linalg.norm(t)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.waypoints_uv, axis=0), axis=1)))

    def point_at(self, s: float) -> np.ndarray:
        """Surface point at arc position s, clamped to [0, length]."""
        s = min(max(s, 0.0), self.length)
        acc = 0.0
        for a, b in zip(self.waypoints_uv[:-1], self.waypoints_uv[1:]):
            step = float(np.linalg.norm(b - a))
            if acc + step >= s or step == 0.0:
                frac = 0.0 if step == 0.0 else (s - acc) / step
                return a + frac * (b - a)
            acc += step
        return self.waypoints_uv[-1].copy()


@dataclass
class MarkerSet:
    """Four operator-placed image points on the camera view, pixels."""

    pixels: np.ndarray   # (4, 2)

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float).reshape(4, 2)
        self.pixels = p


@dataclass
class TaskProgram:
    segments: list[PathSegment]
    object_pose: Pose
    source: ProgramSource
    pose_confirmed: bool = False

    def world_pose_at(self, geometry: SurfaceGrid, seg: PathSegment, s: float) -> Pose:
        uv = seg.point_at(s)
        return self.world_pose_at_uv(geometry, uv, seg.tangent_uv)

    def world_pose_at_uv(self, geometry: SurfaceGrid, uv, tangent_uv) -> Pose:
        p_local, n_local = geometry.point_normal_local(np.array([uv[0]]), np.array([uv[1]]))
        point = self.object_pose.transform_points(p_local)[0]
        normal = self.object_pose.rotate_many(n_local)[0]
        shifted = geometry.with_pose(self.object_pose)
        tangent = shifted.tangent_world(uv[0], uv[1], tangent_uv)
        return contact_pose(point, normal, tangent)

    def waypoint_poses(self, geometry: SurfaceGrid, seg: PathSegment) -> list[Pose]:
        return [self.world_pose_at_uv(geometry, uv, seg.tangent_uv) for uv in seg.waypoints_uv]

    def counts(self) -> dict:
        out = {s.value: 0 for s in SegmentStatus}
        for seg in self.segments:
            out[seg.status.value] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "source": self.source.value,
            "object_pose": self.object_pose.to_dict(),
            "pose_confirmed": self.pose_confirmed,
            "segments": [
                {
                    "waypoints_uv": seg.waypoints_uv.tolist(),
                    "tangent_uv": seg.tangent_uv.tolist(),
                    "nominal": seg.nominal.to_dict(),
                    "status": seg.status.value,
                    "completed_episode": seg.completed_episode,
                }
                for seg in self.segments
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "TaskProgram":
        segments = [
            PathSegment(
                waypoints_uv=np.array(s["waypoints_uv"], dtype=float),
                tangent_uv=np.array(s["tangent_uv"], dtype=float),
                nominal=NominalParameters.from_dict(s["nominal"]),
                status=SegmentStatus(s["status"]),
                completed_episode=s.get("completed_episode"),
            )
            for s in d["segments"]
        ]
        return TaskProgram(segments=segments,
                           object_pose=Pose.from_dict(d["object_pose"]),
                           source=ProgramSource(d["source"]),
                           pose_confirmed=bool(d.get("pose_confirmed", False)))


def _lane_waypoints(start: np.ndarray, end: np.ndarray, spacing: float) -> np.ndarray:
    length = float(np.linalg.norm(end - start))
    n = max(2, int(np.ceil(length / spacing)) + 1)
    return np.linspace(start, end, n)


def _serpentine(lane_axis: np.ndarray, transverse_axis: np.ndarray,
                lane_span: tuple, positions: np.ndarray, params: NominalParameters,
                spacing: float, clip=None) -> list[PathSegment]:
    """Alternating-direction lanes at the given transverse positions. `clip`
    maps a transverse position to the lane's (lo, hi) interval; None keeps
    the full span."""
    segments = []
    forward = True
    for _ in range(params.passes):
        for t in positions:
            lo, hi = lane_span if clip is None else clip(t)
            if hi - lo < 1e-9:
                continue
            a = lane_axis * lo + transverse_axis * t
            b = lane_axis * hi + transverse_axis * t
            if not forward:
                a, b = b, a
            direction = (b - a) / np.linalg.norm(b - a)
            segments.append(PathSegment(
                waypoints_uv=_lane_waypoints(a, b, spacing),
                tangent_uv=direction,
                nominal=params,
            ))
            forward = not forward
    return segments


def serpentine_program(geometry: SurfaceGrid, params: NominalParameters,
                       disc_radius: float, source: ProgramSource,
                       object_pose: Pose, spacing: float = WAYPOINT_SPACING,
                       margin: float = 0.0) -> TaskProgram:
    """Serpentine raster over the whole patch, stepover = disc radius."""
    if params.orientation is Orientation.HORIZONTAL:
        lane_axis = np.array([1.0, 0.0])
        trans_axis = np.array([0.0, 1.0])
        lane_extent, trans_extent = geometry.extent_u, geometry.extent_v
    else:
        lane_axis = np.array([0.0, 1.0])
        trans_axis = np.array([1.0, 0.0])
        lane_extent, trans_extent = geometry.extent_v, geometry.extent_u
    span = (-lane_extent / 2.0 + margin, lane_extent / 2.0 - margin)
    width = trans_extent - 2.0 * margin
    n_lanes = int(np.ceil(width / disc_radius)) + 1
    positions = np.linspace(-width / 2.0, width / 2.0, n_lanes)
    segments = _serpentine(lane_axis, trans_axis, span, positions, params, spacing)
    return TaskProgram(segments=segments, object_pose=object_pose, source=source)


def load_structured_model(geometry_id: str, library: dict) -> TaskProgram:
    """Stored object-frame raster for a known geometry. The model is scenario
    data (hard-coded passes), not learned from demonstrations."""
    if geometry_id not in library:
        raise UnknownGeometry(f"no structured model for geometry {geometry_id!r}")
    entry = library[geometry_id]
    return serpentine_program(
        geometry=entry["geometry"],
        params=entry.get("nominal", NominalParameters()),
        disc_radius=entry["disc_radius"],
        source=ProgramSource.STRUCTURED_MODEL,
        object_pose=entry.get("initial_pose", Pose.identity()),
        spacing=entry.get("waypoint_spacing", WAYPOINT_SPACING),
        margin=entry.get("margin", 0.0),
    )


def project_markers(markers: MarkerSet, camera: CameraModel, cam_pose: Pose,
                    grid: SurfaceGrid) -> np.ndarray:
    """Pixel -> camera ray -> surface intersection for each marker, order
    preserved. Returns (4, 2) surface coordinates."""
    dirs_cam = camera.pixel_rays(markers.pixels[:, 0], markers.pixels[:, 1])
    origins = np.broadcast_to(cam_pose.position, dirs_cam.shape).copy()
    dirs = cam_pose.rotate_many(dirs_cam)
    t = intersect_rays(grid, origins, dirs, camera.range_min, camera.range_max)
    corners = []
    for i in range(4):
        if np.isnan(t[i]):
            raise MarkerOffSurface(i)
        hit_world = origins[i] + t[i] * dirs[i]
        local = grid.object_pose.inverse().transform_point(hit_world)
        u, v = grid.project_uv(local[None, :])
        corners.append([u[0], v[0]])
    return np.array(corners)


def _convex_order(quad: np.ndarray) -> np.ndarray:
    center = quad.mean(axis=0)
    angles = np.arctan2(quad[:, 1] - center[1], quad[:, 0] - center[0])
    return quad[np.argsort(angles)]


def quad_area(quad: np.ndarray) -> float:
    q = _convex_order(np.asarray(quad, dtype=float))
    x, y = q[:, 0], q[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def quad_cell_mask(grid: SurfaceGrid, quad: np.ndarray) -> np.ndarray:
    """Boolean mask of grid cells whose centers lie inside the convex quad."""
    q = _convex_order(np.asarray(quad, dtype=float))
    iu, iv = np.meshgrid(np.arange(grid.nu), np.arange(grid.nv), indexing="ij")
    u, v = grid.cell_center_uv(iu, iv)
    inside = np.ones_like(u, dtype=bool)
    for i in range(4):
        ax, ay = q[i]
        bx, by = q[(i + 1) % 4]
        inside &= (bx - ax) * (v - ay) - (by - ay) * (u - ax) >= 0
    return inside


def _clip_lane_to_quad(q: np.ndarray, lane_axis: np.ndarray, trans_axis: np.ndarray,
                       t: float, slack: float) -> tuple[float, float]:
    """Intersection interval of the lane line (parameter s along lane_axis at
    transverse position t) with the convex quad grown by `slack`, so lanes on
    the bounding-box edge of a slightly tilted quad keep their full length."""
    lo, hi = -np.inf, np.inf
    origin = trans_axis * t
    for i in range(4):
        a = q[i]
        b = q[(i + 1) % 4]
        edge = b - a
        normal = np.array([-(edge[1]), edge[0]])  # inward for CCW order
        normal = normal / np.linalg.norm(normal)
        denom = float(np.dot(normal, lane_axis))
        rhs = float(np.dot(normal, a - origin)) - slack
        if abs(denom) < 1e-12:
            if rhs > 0:  # line entirely outside this half-plane
                return 0.0, 0.0
            continue
        bound = rhs / denom
        if denom > 0:
            lo = max(lo, bound)
        else:
            hi = min(hi, bound)
    if hi <= lo:
        return 0.0, 0.0
    return lo, hi


def generate_raster(quad: np.ndarray, params: NominalParameters, grid: SurfaceGrid,
                    disc_radius: float, spacing: float = WAYPOINT_SPACING) -> TaskProgram:
    """Serpentine raster clipped to the marker quad, stepover = disc radius
    (50% footprint overlap), repeated params.passes times."""
    quad = np.asarray(quad, dtype=float).reshape(4, 2)
    if quad_area(quad) <= 4.0 * grid.cell_size ** 2:
        raise DegenerateQuad(f"quad area {quad_area(quad):.6f} m² too small")
    q = _convex_order(quad)

    if params.orientation is Orientation.HORIZONTAL:
        lane_axis = np.array([1.0, 0.0])
        trans_axis = np.array([0.0, 1.0])
    else:
        lane_axis = np.array([0.0, 1.0])
        trans_axis = np.array([1.0, 0.0])
    trans_vals = q @ trans_axis
    tmin, tmax = float(trans_vals.min()), float(trans_vals.max())
    n_lanes = int(np.ceil((tmax - tmin) / disc_radius)) + 1
    positions = np.linspace(tmin, tmax, n_lanes)

    segments = _serpentine(lane_axis, trans_axis, (0.0, 0.0), positions, params, spacing,
                           clip=lambda t: _clip_lane_to_quad(q, lane_axis, trans_axis, t,
                                                             slack=grid.cell_size / 2.0))
    if not segments:
        raise DegenerateQuad("no lane intersects the quad")
    program = TaskProgram(segments=segments, object_pose=grid.object_pose,
                          source=ProgramSource.UNSTRUCTURED_SPEC)
    # marker-bounded tasks carry their pose directly from the live camera
    # geometry; there is no registration step to confirm
    program.pose_confirmed = True
    return program


def segment_reachability(program: TaskProgram, robot: RobotModel,
                         geometry: SurfaceGrid) -> TaskProgram:
    """Color each pending segment Reachable iff every waypoint pose has an IK
    solution; Completed segments keep their memory untouched."""
    if not program.pose_confirmed:
        raise UnconfirmedRegistration("object pose not confirmed")
    seeds = robot.default_seeds()
    for seg in program.segments:
        if seg.status is SegmentStatus.COMPLETED:
            continue
        status = SegmentStatus.REACHABLE
        for pose in program.waypoint_poses(geometry, seg):
            if is_reachable(robot, pose, seeds) is ReachabilityStatus.UNREACHABLE:
                status = SegmentStatus.UNREACHABLE
                break
        seg.status = status
    return program


def reposition_object(program: TaskProgram, registration: RegistrationResult) -> TaskProgram:
    """Rebase the program on a newly confirmed object pose. World waypoints
    follow the object-frame data; completion memory is preserved and all
    other statuses reset to the unchecked placeholder."""
    if not registration.accepted:
        raise UnconfirmedRegistration("registration not confirmed by operator")
    program.object_pose = registration.object_pose
    program.pose_confirmed = True
    for seg in program.segments:
        if seg.status is not SegmentStatus.COMPLETED:
            seg.status = SegmentStatus.REACHABLE
    return program
