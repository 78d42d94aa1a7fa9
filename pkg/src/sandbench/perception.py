"""Simulated depth scanning and human-in-the-loop registration.

Scans are synthetic pinhole depth renders of the analytic workpiece patch;
registration is iterative closest point against the same analytic surface,
followed by operator nudges and an explicit confirm step.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AlreadyAccepted, DegenerateCloud, EmptyScan
from .geometry import Pose, quat_from_rotvec, quat_multiply, quat_normalize
from .kinematics import JointConfig, RobotModel, camera_pose
from .surface import SurfaceGrid

ICP_MAX_ITERS = 100
ICP_REL_TOL = 1e-6
INLIER_DISTANCE = 0.005          # m
ACCEPT_INLIER_FRACTION = 0.8


@dataclass(frozen=True)
class CameraModel:
    """Pinhole depth camera: z forward, x right, y down."""

    width: int = 640
    height: int = 576
    fov_x: float = np.deg2rad(75.0)
    fov_y: float = np.deg2rad(65.0)
    range_min: float = 0.25
    range_max: float = 2.5
    stride: int = 1   # pixel decimation; >1 trades density for speed

    def ray_directions(self) -> np.ndarray:
        """Unit ray directions, camera frame, one per sampled pixel."""
        xs = np.arange(0, self.width, self.stride)
        ys = np.arange(0, self.height, self.stride)
        px, py = np.meshgrid(xs, ys, indexing="ij")
        return self.pixel_rays(px.ravel(), py.ravel())

    def pixel_rays(self, px, py) -> np.ndarray:
        px = np.asarray(px, dtype=float)
        py = np.asarray(py, dtype=float)
        x = np.tan(self.fov_x / 2.0) * (2.0 * (px + 0.5) / self.width - 1.0)
        y = np.tan(self.fov_y / 2.0) * (2.0 * (py + 0.5) / self.height - 1.0)
        d = np.stack([x, y, np.ones_like(x)], axis=-1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)


@dataclass(frozen=True)
class PointCloud:
    """3D points in the robot base frame."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if p.size and not np.all(np.isfinite(p)):
            raise ValueError("non-finite cloud point")
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return self.points.shape[0]

    def transformed(self, pose: Pose) -> "PointCloud":
        return PointCloud(pose.transform_points(self.points))


def write_ply(cloud: PointCloud, path: str) -> None:
    """ASCII PLY dump for external debugging viewers."""
    lines = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
             "property float x", "property float y", "property float z", "end_header"]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
        for p in cloud.points:
            f.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f}\n")


def intersect_rays(grid: SurfaceGrid, origins: np.ndarray, dirs: np.ndarray,
                   t_min: float, t_max: float) -> np.ndarray:
    """First intersection distance of world-frame rays with the patch;
    NaN where a ray misses or falls outside the depth range."""
    inv = grid.object_pose.inverse()
    o = inv.transform_points(origins)
    d = inv.rotate_many(dirs)
    n = o.shape[0]
    t = np.full(n, np.nan)

    if grid.kind == "flat":
        dz = d[:, 2]
        valid = np.abs(dz) > 1e-12
        tt = np.where(valid, -o[:, 2] / np.where(valid, dz, 1.0), np.nan)
        hit = o + tt[:, None] * d
        ok = (valid & (tt > t_min) & (tt < t_max)
              & (np.abs(hit[:, 0]) <= grid.extent_u / 2.0)
              & (np.abs(hit[:, 1]) <= grid.extent_v / 2.0))
        t[ok] = tt[ok]
        return t

    r = grid.curvature_radius
    oy, oz = o[:, 1], o[:, 2] + r
    dy, dz = d[:, 1], d[:, 2]
    a = dy * dy + dz * dz
    b = 2.0 * (oy * dy + oz * dz)
    c = oy * oy + oz * oz - r * r
    disc = b * b - 4.0 * a * c
    solvable = (a > 1e-14) & (disc >= 0.0)
    sq = np.sqrt(np.where(solvable, disc, 0.0))
    phi_max = grid.extent_v / (2.0 * r)
    for root in ((-b - sq), (-b + sq)):
        tt = np.where(solvable, root / (2.0 * a), np.nan)
        hit = o + tt[:, None] * d
        phi = np.arctan2(hit[:, 1], hit[:, 2] + r)
        ok = (solvable & np.isnan(t) & (tt > t_min) & (tt < t_max)
              & (np.abs(hit[:, 0]) <= grid.extent_u / 2.0)
              & (np.abs(phi) <= phi_max))
        t[ok] = tt[ok]
    return t


def simulate_scan(robot: RobotModel, grid: SurfaceGrid, pan_poses: list[JointConfig],
                  noise_sigma: float, seed: int,
                  camera: CameraModel = CameraModel()) -> PointCloud:
    """Union of per-pose synthetic depth renders with Gaussian depth noise.
    Deterministic for a fixed (inputs, seed) pair."""
    if not pan_poses:
        raise ValueError("pan_poses must be nonempty")
    rng = np.random.default_rng(seed)
    dirs_cam = camera.ray_directions()
    clouds = []
    for q in pan_poses:
        cam = camera_pose(robot, q)
        origins = np.broadcast_to(cam.position, dirs_cam.shape).copy()
        dirs = cam.rotate_many(dirs_cam)
        t = intersect_rays(grid, origins, dirs, camera.range_min, camera.range_max)
        hit = ~np.isnan(t)
        if not np.any(hit):
            continue
        depth = t[hit]
        if noise_sigma > 0.0:
            depth = depth + rng.normal(0.0, noise_sigma, depth.shape)
        clouds.append(origins[hit] + depth[:, None] * dirs[hit])
    if not clouds:
        raise EmptyScan("no ray hit the workpiece")
    world = np.vstack(clouds)
    return PointCloud(robot.base_pose.inverse().transform_points(world))


@dataclass(frozen=True)
class RegistrationResult:
    """Estimated object pose (model frame -> robot base frame) plus fit
    quality scores. `accepted` turns true only through confirm_fit."""

    object_pose: Pose
    rms_residual: float
    inlier_fraction: float
    accepted: bool = False
    residual_history: tuple = ()
    cloud: PointCloud | None = field(default=None, repr=False, compare=False)
    model: SurfaceGrid | None = field(default=None, repr=False, compare=False)

    def scores(self) -> dict:
        return {"rms_residual": self.rms_residual,
                "inlier_fraction": self.inlier_fraction,
                "accepted": self.accepted}


def _surface_fit_errors(model: SurfaceGrid, pose: Pose, points: np.ndarray):
    local = pose.inverse().transform_points(points)
    u_raw, v_raw = model.project_uv(local)
    u = np.clip(u_raw, -model.extent_u / 2.0, model.extent_u / 2.0)
    v = np.clip(v_raw, -model.extent_v / 2.0, model.extent_v / 2.0)
    surf, normals = model.point_normal_local(u, v)
    dist = np.linalg.norm(local - surf, axis=-1)
    # points whose projection got clamped sit past the patch boundary and
    # anchor the otherwise free in-plane directions
    boundary = (np.abs(u_raw) > model.extent_u / 2.0) | (np.abs(v_raw) > model.extent_v / 2.0)
    return local, surf, normals, dist, boundary


def _rms(dist: np.ndarray) -> float:
    return float(np.sqrt(np.mean(dist ** 2)))


def auto_register(cloud: PointCloud, model: SurfaceGrid, init: Pose,
                  max_iters: int = ICP_MAX_ITERS) -> RegistrationResult:
    """Iterative closest-point refinement of the object pose from an initial
    guess. Interior correspondences contribute point-to-plane rows; points
    projecting onto the patch boundary contribute full point-to-point rows,
    which pin down the otherwise unconstrained in-plane directions. A
    halving line search keeps the reported residual monotone non-increasing.
    """
    if len(cloud) < 100:
        raise ValueError("registration needs at least 100 points")
    pts = cloud.points
    pose = init
    local, surf, normals, dist, boundary = _surface_fit_errors(model, pose, pts)
    rms = _rms(dist)
    history = [rms]

    for _ in range(max_iters):
        interior = ~boundary
        rows = []
        rhs = []
        if np.any(interior):
            x = local[interior]
            n = normals[interior]
            rows.append(np.hstack([np.cross(x, n), n]))
            rhs.append(-np.einsum("ij,ij->i", x - surf[interior], n))
        if np.any(boundary):
            x = local[boundary]
            m = x.shape[0]
            a = np.zeros((3 * m, 6))
            # d/dω (ω × x) = -skew(x); d/dt = I
            a[0::3, 1] = x[:, 2]
            a[0::3, 2] = -x[:, 1]
            a[1::3, 0] = -x[:, 2]
            a[1::3, 2] = x[:, 0]
            a[2::3, 0] = x[:, 1]
            a[2::3, 1] = -x[:, 0]
            a[0::3, 3] = 1.0
            a[1::3, 4] = 1.0
            a[2::3, 5] = 1.0
            rows.append(a)
            rhs.append((surf[boundary] - x).ravel())
        a_full = np.vstack(rows)
        b_full = np.concatenate(rhs)
        # minimal-norm solve: genuinely unconstrained directions (e.g. the
        # axis of a perfectly aligned cylinder patch) stay untouched, and the
        # rcond cutoff keeps noise-level pseudo-constraints from injecting
        # drift along them
        xi, _, rank, _ = np.linalg.lstsq(a_full, b_full, rcond=1e-6)
        if rank < 3:
            raise DegenerateCloud(f"correspondence rank {rank} cannot fix a pose")

        # accept the largest step (halving) that does not raise the residual
        improved = False
        for _halve in range(20):
            g = Pose(xi[3:], quat_from_rotvec(xi[:3]))
            candidate = pose.compose(g.inverse())
            c_local, c_surf, c_normals, c_dist, c_boundary = _surface_fit_errors(model, candidate, pts)
            c_rms = _rms(c_dist)
            if c_rms <= rms + 1e-15:
                pose = candidate
                local, surf, normals, dist, boundary = c_local, c_surf, c_normals, c_dist, c_boundary
                prev = rms
                rms = c_rms
                history.append(rms)
                improved = True
                break
            xi = xi / 2.0
        if not improved:
            break
        if prev - rms < ICP_REL_TOL * max(prev, 1e-12):
            break

    inliers = float(np.mean(dist <= INLIER_DISTANCE))
    return RegistrationResult(object_pose=pose, rms_residual=rms,
                              inlier_fraction=inliers, accepted=False,
                              residual_history=tuple(history),
                              cloud=cloud, model=model)


def select_geometry(cloud: PointCloud, candidates: dict[str, SurfaceGrid],
                    init: Pose) -> tuple[str, RegistrationResult]:
    """Best-residual geometry hypothesis across the scenario library, so the
    operator can switch the model when it is identified incorrectly."""
    if not candidates:
        raise ValueError("no candidate geometries")
    best = None
    for name, grid in candidates.items():
        result = auto_register(cloud, grid, init)
        if best is None or result.rms_residual < best[1].rms_residual:
            best = (name, result)
    return best


def apply_manual_adjustment(result: RegistrationResult, delta: Pose) -> RegistrationResult:
    """Compose an operator nudge onto the fit: translation adds in the base
    frame, rotation pre-multiplies about the object origin. Residual and
    inlier scores are recomputed; the fit stays unconfirmed."""
    if result.accepted:
        raise AlreadyAccepted("cannot adjust a confirmed fit")
    old = result.object_pose
    new_pose = Pose(old.position + delta.position,
                    quat_normalize(quat_multiply(delta.quat, old.quat)))
    if result.cloud is not None and result.model is not None:
        _, _, _, dist, _ = _surface_fit_errors(result.model, new_pose, result.cloud.points)
        rms = _rms(dist)
        inliers = float(np.mean(dist <= INLIER_DISTANCE))
    else:
        rms, inliers = result.rms_residual, result.inlier_fraction
    return replace(result, object_pose=new_pose, rms_residual=rms,
                   inlier_fraction=inliers)


def confirm_fit(result: RegistrationResult) -> RegistrationResult:
    if result.accepted:
        raise AlreadyAccepted("fit already confirmed")
    return replace(result, accepted=True)
