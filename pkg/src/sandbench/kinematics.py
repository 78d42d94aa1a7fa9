"""Serial-link arm model: forward kinematics, damped least-squares IK,
and point-wise reachability checks.

Link geometry uses modified (Craig) Denavit-Hartenberg rows loaded from a
JSON document; the default model is a 7-DOF Franka-class arm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from .errors import JointLimitViolation
from .geometry import Pose, quat_angle, quat_to_matrix

IK_DAMPING = 0.01
IK_MAX_ITERS = 200
IK_POS_TOL = 1e-3       # m
IK_ORI_TOL = 1e-2       # rad
IK_STEP_CLAMP = 0.5     # rad per joint per iteration
IK_STALL_WINDOW = 15    # iterations without improvement before giving up


@dataclass(frozen=True)
class JointConfig:
    """Joint positions in radians, one per degree of freedom."""

    angles: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=float).reshape(-1)
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite joint angle")
        object.__setattr__(self, "angles", a)

    def __len__(self) -> int:
        return len(self.angles)


class ReachabilityStatus(Enum):
    REACHABLE = "reachable"      # rendered green
    UNREACHABLE = "unreachable"  # rendered red


@dataclass(frozen=True)
class RobotModel:
    """Arm description: DH rows [a, d, alpha, theta_offset], joint limits,
    and the rigid transforms to the sander disc center and the depth camera."""

    name: str
    dh: np.ndarray                # (n, 4)
    joint_limits: np.ndarray      # (n, 2), lo < hi
    tool_transform: Pose          # distal link frame -> sander disc center
    camera_transform: Pose        # distal link frame -> depth camera
    base_pose: Pose               # robot base in world
    home: np.ndarray = field(default_factory=lambda: np.zeros(7))
    seed_configs: tuple = ()      # extra IK seeds (elbow variants)

    def __post_init__(self):
        dh = np.asarray(self.dh, dtype=float)
        lim = np.asarray(self.joint_limits, dtype=float)
        if dh.shape[0] != lim.shape[0]:
            raise ValueError("dh rows and joint_limits rows differ")
        if np.any(lim[:, 0] >= lim[:, 1]):
            raise ValueError("joint limit lo >= hi")
        object.__setattr__(self, "dh", dh)
        object.__setattr__(self, "joint_limits", lim)
        object.__setattr__(self, "home", np.asarray(self.home, dtype=float))

    @property
    def dof(self) -> int:
        return self.dh.shape[0]

    def check_limits(self, q: JointConfig) -> None:
        if len(q) != self.dof:
            raise ValueError(f"expected {self.dof} joints, got {len(q)}")
        for i, (a, (lo, hi)) in enumerate(zip(q.angles, self.joint_limits)):
            if a < lo or a > hi:
                raise JointLimitViolation(i, a, lo, hi)

    def clamp(self, angles: np.ndarray) -> np.ndarray:
        return np.clip(angles, self.joint_limits[:, 0], self.joint_limits[:, 1])

    def max_reach(self) -> float:
        """Upper bound on distance from the shoulder to the tool point."""
        links = float(np.sum(np.abs(self.dh[1:, 0])) + np.sum(np.abs(self.dh[1:, 1])))
        return links + float(np.linalg.norm(self.tool_transform.position))

    def shoulder_position(self) -> np.ndarray:
        return self.base_pose.transform_point(np.array([0.0, 0.0, self.dh[0, 1]]))

    def default_seeds(self) -> list[JointConfig]:
        seeds = [JointConfig(self.home)]
        seeds.extend(JointConfig(np.asarray(s, dtype=float)) for s in self.seed_configs)
        return seeds

    @staticmethod
    def from_dict(d: dict) -> "RobotModel":
        return RobotModel(
            name=d.get("name", "robot"),
            dh=np.array(d["dh"], dtype=float),
            joint_limits=np.array(d["joint_limits"], dtype=float),
            tool_transform=Pose.from_dict(d["tool_transform"]),
            camera_transform=Pose.from_dict(d["camera_transform"]),
            base_pose=Pose.from_dict(d.get("base_pose", Pose.identity().to_dict())),
            home=np.array(d["home"], dtype=float),
            seed_configs=tuple(tuple(s) for s in d.get("seed_configs", [])),
        )

    @staticmethod
    def load(path: str) -> "RobotModel":
        with open(path) as f:
            return RobotModel.from_dict(json.load(f))

    @staticmethod
    def default() -> "RobotModel":
        text = resources.files("sandbench").joinpath("data/franka_panda.json").read_text()
        return RobotModel.from_dict(json.loads(text))


def _dh_transform(a: float, d: float, alpha: float, theta: float) -> np.ndarray:
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st, 0.0, a],
        [st * ca, ct * ca, -sa, -d * sa],
        [st * sa, ct * sa, ca, d * ca],
        [0.0, 0.0, 0.0, 1.0],
    ])


def _chain_frames(robot: RobotModel, angles: np.ndarray) -> list[np.ndarray]:
    """World transforms of every joint frame, base included as element 0."""
    frames = [robot.base_pose.to_matrix()]
    t = frames[0]
    for i in range(robot.dof):
        a, d, alpha, off = robot.dh[i]
        t = t @ _dh_transform(a, d, alpha, angles[i] + off)
        frames.append(t)
    return frames


def _frame_to_pose(m: np.ndarray, tip: Pose) -> Pose:
    return Pose.from_matrix(m).compose(tip)


def forward_kinematics(robot: RobotModel, q: JointConfig) -> Pose:
    """World pose of the sander disc center. Out-of-limit joints are an error."""
    robot.check_limits(q)
    return _frame_to_pose(_chain_frames(robot, q.angles)[-1], robot.tool_transform)


def camera_pose(robot: RobotModel, q: JointConfig) -> Pose:
    robot.check_limits(q)
    return _frame_to_pose(_chain_frames(robot, q.angles)[-1], robot.camera_transform)


def _jacobian(robot: RobotModel, frames: list[np.ndarray], tool_pos: np.ndarray) -> np.ndarray:
    n = robot.dof
    jac = np.zeros((6, n))
    for i in range(n):
        frame = frames[i + 1]
        axis = frame[:3, 2]
        origin = frame[:3, 3]
        jac[:3, i] = np.cross(axis, tool_pos - origin)
        jac[3:, i] = axis
    return jac


def _pose_error(current: np.ndarray, target_pos: np.ndarray, target_rot: np.ndarray,
                tool: Pose) -> tuple[np.ndarray, float, float]:
    tool_mat = tool.to_matrix()
    eff = current @ tool_mat
    pos_err = target_pos - eff[:3, 3]
    rot_err_mat = target_rot @ eff[:3, :3].T
    # rotation-vector form of the residual rotation, world frame
    from .geometry import quat_from_matrix, quat_to_rotvec
    omega = quat_to_rotvec(quat_from_matrix(rot_err_mat))
    return np.concatenate([pos_err, omega]), float(np.linalg.norm(pos_err)), float(np.linalg.norm(omega))


def solve_ik(robot: RobotModel, target: Pose, seed: JointConfig) -> JointConfig | None:
    """Damped least-squares IK with per-iteration joint-limit projection.

    Returns None when the target is unreachable within the iteration budget;
    that is an expected value, not a fault.
    """
    robot.check_limits(seed)
    # targets beyond the arm's reach sphere can never converge
    if np.linalg.norm(target.position - robot.shoulder_position()) > robot.max_reach():
        return None

    target_pos = target.position
    target_rot = quat_to_matrix(target.quat)
    q = seed.angles.copy()
    lam2 = IK_DAMPING ** 2
    eye6 = np.eye(6)
    best_err = np.inf
    stall = 0

    for _ in range(IK_MAX_ITERS):
        frames = _chain_frames(robot, q)
        err, pos_err, ori_err = _pose_error(frames[-1], target_pos, target_rot, robot.tool_transform)
        if pos_err < IK_POS_TOL and ori_err < IK_ORI_TOL:
            return JointConfig(q)
        total = pos_err + ori_err
        if total < best_err - 1e-12:
            best_err = total
            stall = 0
        else:
            stall += 1
            if stall >= IK_STALL_WINDOW:
                return None
        tool_pos = (frames[-1] @ robot.tool_transform.to_matrix())[:3, 3]
        jac = _jacobian(robot, frames, tool_pos)
        dq = jac.T @ np.linalg.solve(jac @ jac.T + lam2 * eye6, err)
        peak = np.max(np.abs(dq))
        if peak > IK_STEP_CLAMP:
            dq *= IK_STEP_CLAMP / peak
        q = robot.clamp(q + dq)
    return None


def is_reachable(robot: RobotModel, target: Pose, seeds: list[JointConfig]) -> ReachabilityStatus:
    """Reachable iff solve_ik succeeds from any seed, tried in order."""
    if not seeds:
        raise ValueError("seeds must be nonempty")
    for seed in seeds:
        if solve_ik(robot, target, seed) is not None:
            return ReachabilityStatus.REACHABLE
    return ReachabilityStatus.UNREACHABLE


def contact_pose(point: np.ndarray, normal: np.ndarray, tangent: np.ndarray | None = None) -> Pose:
    """Tool pose for sanding at a surface point: disc center on the point,
    tool z anti-parallel to the outward normal, tool x along the path tangent
    when given (world-x projected otherwise)."""
    normal = np.asarray(normal, dtype=float)
    z = -normal / np.linalg.norm(normal)
    x = None
    if tangent is not None:
        t = np.asarray(tangent, dtype=float)
        t = t - np.dot(t, z) * z
        if np.linalg.norm(t) > 1e-9:
            x = t / np.linalg.norm(t)
    if x is None:
        for fallback in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
            t = fallback - np.dot(fallback, z) * z
            if np.linalg.norm(t) > 1e-9:
                x = t / np.linalg.norm(t)
                break
    y = np.cross(z, x)
    rot = np.column_stack([x, y, z])
    m = np.eye(4)
    m[:3, :3] = rot
    m[:3, 3] = np.asarray(point, dtype=float)
    return Pose.from_matrix(m)


def reachability_grid(robot: RobotModel, points: list[tuple[np.ndarray, np.ndarray]],
                      standoff: Pose | None = None) -> list[ReachabilityStatus]:
    """Point-wise reachability of sanding poses derived from (point, normal)
    pairs. Each entry is independent of the others, so the grid stays
    consistent with is_reachable and safe to evaluate in parallel."""
    if standoff is None:
        standoff = Pose.identity()
    seeds = robot.default_seeds()
    out = []
    for point, normal in points:
        pose = contact_pose(point, normal).compose(standoff)
        out.append(is_reachable(robot, pose, seeds))
    return out


def ik_error(robot: RobotModel, q: JointConfig, target: Pose) -> tuple[float, float]:
    """Position (m) and orientation (rad) error of FK(q) against a target."""
    pose = forward_kinematics(robot, q)
    return float(np.linalg.norm(pose.position - target.position)), quat_angle(pose.quat, target.quat)
