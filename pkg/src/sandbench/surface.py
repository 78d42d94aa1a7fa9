"""Workpiece surface, coating layer, sanding material removal, and
sandpaper wear.

The surface is a (u, v) cell grid over either a flat plate or a
cylindrical-section patch; u runs along the patch (and the cylinder axis),
v across it (arc length on curved patches). Removal follows Preston's law:
depth rate proportional to contact pressure times relative speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContactOffSurface
from .geometry import Pose


@dataclass(frozen=True)
class MaterialParams:
    """Calibration constants for the removal and wear models. All
    scenario-overridable; defaults target plausible desk-scale behavior."""

    disc_radius: float = 0.0625        # m
    orbital_speed: float = 4000.0      # mm/s equivalent of the random orbit
    coating_default: float = 100.0     # µm
    done_threshold: float = 5.0        # µm: cell counts as sanded below this
    eta_min: float = 0.2               # worn sandpaper efficiency floor
    wear_time: float = 600.0           # s of engaged sanding to full wear
    gouge_limit: float = 20.0          # µm of substrate removal counted as oversand
    pitch_max: float = 0.15            # rad
    pitch_gain: float = 2.0            # leading-edge pressure concentration at full pitch
    nominal_force: float = 15.0        # N
    nominal_feed: float = 50.0         # mm/s
    calibration_margin: float = 2.0    # headroom over the worst-dwell calibration
    k_preston: float = 0.0             # µm per (Pa · mm); 0 means "derive from defaults"

    def __post_init__(self):
        if self.k_preston == 0.0:
            object.__setattr__(self, "k_preston", self.calibrated_k())

    def calibrated_k(self) -> float:
        """Preston coefficient such that two nominal passes strip the default
        coating even at the worst-dwell point of a lane (its endpoint, where
        the disc sweeps only half a chord), times the calibration margin."""
        area = np.pi * self.disc_radius ** 2
        pressure = self.nominal_force / area
        v_eff = self.orbital_speed + self.nominal_feed
        endpoint_dwell = (self.disc_radius * 1000.0) / self.nominal_feed  # s per pass
        return self.calibration_margin * self.coating_default / (2.0 * pressure * v_eff * endpoint_dwell)

    def with_overrides(self, overrides: dict) -> "MaterialParams":
        known = {k: v for k, v in overrides.items() if k in self.__dataclass_fields__}
        unknown = set(overrides) - set(known)
        if unknown:
            raise ValueError(f"unknown material overrides: {sorted(unknown)}")
        if "k_preston" not in known and any(
                k in known for k in ("disc_radius", "orbital_speed", "coating_default",
                                     "nominal_force", "nominal_feed", "calibration_margin")):
            known["k_preston"] = 0.0  # re-derive from the new defaults
        return replace(self, **known)


@dataclass(frozen=True)
class SandpaperState:
    """Engaged-use time of the current sandpaper and its derived efficiency."""

    usage_seconds: float = 0.0
    efficiency: float = 1.0

    @staticmethod
    def fresh() -> "SandpaperState":
        return SandpaperState(0.0, 1.0)


@dataclass(frozen=True)
class ToolContact:
    """Sander state at one instant: where it presses and how."""

    center_uv: np.ndarray              # (2,) m, surface coordinates
    normal_force: float                # N
    tangential_speed: float            # mm/s, magnitude of path motion
    pitch: float                       # rad, tilt about the path-transverse axis
    engaged: bool
    travel_uv: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))

    def __post_init__(self):
        c = np.asarray(self.center_uv, dtype=float).reshape(2)
        t = np.asarray(self.travel_uv, dtype=float).reshape(2)
        n = np.linalg.norm(t)
        if n > 1e-12:
            t = t / n
        else:
            t = np.array([1.0, 0.0])
        if self.normal_force < 0:
            raise ValueError("normal_force must be >= 0")
        object.__setattr__(self, "center_uv", c)
        object.__setattr__(self, "travel_uv", t)


@dataclass(frozen=True)
class CoverageMetrics:
    removed_fraction: float   # of target cells now below done_threshold
    oversand_area: float      # m², bare cells gouged past gouge_limit
    undersand_area: float     # m², target cells still at/above threshold
    removed_volume: float     # mm³ of coating taken off

    def to_dict(self) -> dict:
        return {"removed_fraction": self.removed_fraction,
                "oversand_area": self.oversand_area,
                "undersand_area": self.undersand_area,
                "removed_volume": self.removed_volume}


class SurfaceGrid:
    """Coated workpiece patch with per-cell thickness state.

    Mutated only by removal_step (single writer); everything else reads.
    """

    def __init__(self, nu: int, nv: int, cell_size: float, kind: str = "flat",
                 curvature_radius: float | None = None,
                 object_pose: Pose | None = None,
                 coating: np.ndarray | float = 100.0,
                 target_mask: np.ndarray | None = None):
        if cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        if kind not in ("flat", "cylinder"):
            raise ValueError(f"unknown surface kind {kind!r}")
        if kind == "cylinder":
            if not curvature_radius or curvature_radius <= 0:
                raise ValueError("cylinder patch needs a positive curvature radius")
            if nv * cell_size > np.pi * curvature_radius:
                raise ValueError("arc extent exceeds half the cylinder")
        self.nu = int(nu)
        self.nv = int(nv)
        self.cell_size = float(cell_size)
        self.kind = kind
        self.curvature_radius = float(curvature_radius) if curvature_radius else None
        self.object_pose = object_pose if object_pose is not None else Pose.identity()
        if np.isscalar(coating):
            self.coating = np.full((self.nu, self.nv), float(coating))
        else:
            self.coating = np.asarray(coating, dtype=float).reshape(self.nu, self.nv).copy()
        if np.any(self.coating < 0):
            raise ValueError("coating must be >= 0 everywhere")
        if target_mask is None:
            self.target_mask = np.ones((self.nu, self.nv), dtype=bool)
        else:
            self.target_mask = np.asarray(target_mask, dtype=bool).reshape(self.nu, self.nv).copy()
        self.initial_coating = self.coating.copy()
        self.substrate_removal = np.zeros((self.nu, self.nv))

    # -- parameterization ---------------------------------------------------

    @property
    def extent_u(self) -> float:
        return self.nu * self.cell_size

    @property
    def extent_v(self) -> float:
        return self.nv * self.cell_size

    def cell_center_uv(self, iu, iv):
        u = (np.asarray(iu) + 0.5) * self.cell_size - self.extent_u / 2.0
        v = (np.asarray(iv) + 0.5) * self.cell_size - self.extent_v / 2.0
        return u, v

    def cell_index(self, u: float, v: float) -> tuple[int, int] | None:
        iu = int(np.floor((u + self.extent_u / 2.0) / self.cell_size))
        iv = int(np.floor((v + self.extent_v / 2.0) / self.cell_size))
        if 0 <= iu < self.nu and 0 <= iv < self.nv:
            return iu, iv
        return None

    def contains_uv(self, u: float, v: float) -> bool:
        return (abs(u) <= self.extent_u / 2.0) and (abs(v) <= self.extent_v / 2.0)

    def point_normal_local(self, u, v):
        """Object-frame surface point and outward unit normal at (u, v).
        Vectorized over array inputs."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "flat":
            zeros = np.zeros_like(u)
            ones = np.ones_like(u)
            p = np.stack([u, v, zeros], axis=-1)
            n = np.stack([zeros, zeros, ones], axis=-1)
            return p, n
        r = self.curvature_radius
        phi = v / r
        p = np.stack([u, r * np.sin(phi), r * np.cos(phi) - r], axis=-1)
        n = np.stack([np.zeros_like(u), np.sin(phi), np.cos(phi)], axis=-1)
        return p, n

    def point_normal_world(self, u, v):
        p, n = self.point_normal_local(u, v)
        return self.object_pose.transform_points(p), self.object_pose.rotate_many(n)

    def tangent_world(self, u, v, duv):
        """World direction of a unit step duv=(du, dv) on the surface."""
        du, dv = duv
        if self.kind == "flat":
            t = np.array([du, dv, 0.0])
        else:
            phi = v / self.curvature_radius
            t = np.array([du, dv * np.cos(phi), -dv * np.sin(phi)])
        t = t / np.linalg.norm(t)
        return self.object_pose.rotate(t)

    def project_uv(self, local_points: np.ndarray):
        """Unclamped surface coordinates of each object-frame 3D point."""
        pts = np.asarray(local_points, dtype=float)
        if self.kind == "flat":
            return pts[:, 0], pts[:, 1]
        r = self.curvature_radius
        phi = np.arctan2(pts[:, 1], pts[:, 2] + r)
        return pts[:, 0], phi * r

    def closest_uv(self, local_points: np.ndarray):
        """Surface coordinates of the closest patch point to each object-frame
        3D point, clamped to the patch bounds, plus the 3D distance."""
        pts = np.asarray(local_points, dtype=float)
        u, v = self.project_uv(pts)
        u = np.clip(u, -self.extent_u / 2.0, self.extent_u / 2.0)
        v = np.clip(v, -self.extent_v / 2.0, self.extent_v / 2.0)
        surf, _ = self.point_normal_local(u, v)
        dist = np.linalg.norm(pts - surf, axis=-1)
        return u, v, dist

    # -- state --------------------------------------------------------------

    def copy(self) -> "SurfaceGrid":
        g = SurfaceGrid(self.nu, self.nv, self.cell_size, self.kind,
                        self.curvature_radius, self.object_pose,
                        self.coating, self.target_mask)
        g.initial_coating = self.initial_coating.copy()
        g.substrate_removal = self.substrate_removal.copy()
        return g

    def with_pose(self, pose: Pose) -> "SurfaceGrid":
        g = self.copy()
        g.object_pose = pose
        return g


def removal_step(grid: SurfaceGrid, contact: ToolContact, paper: SandpaperState,
                 dt: float, params: MaterialParams) -> SurfaceGrid:
    """Apply one Preston-law removal increment under the disc footprint.

    The normal force is distributed over the in-patch footprint cells with a
    leading-edge concentration that grows with |pitch|, so pitching the tool
    raises the peak removal rate without changing the total applied force.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if abs(contact.pitch) > params.pitch_max + 1e-12:
        raise ValueError("pitch beyond pitch_max")
    if not contact.engaged:
        return grid
    cu, cv = contact.center_uv
    if not grid.contains_uv(cu, cv):
        raise ContactOffSurface(f"contact center ({cu:.4f}, {cv:.4f}) outside patch")

    r = params.disc_radius
    iu0 = max(0, int(np.floor((cu - r + grid.extent_u / 2) / grid.cell_size)))
    iu1 = min(grid.nu, int(np.ceil((cu + r + grid.extent_u / 2) / grid.cell_size)) + 1)
    iv0 = max(0, int(np.floor((cv - r + grid.extent_v / 2) / grid.cell_size)))
    iv1 = min(grid.nv, int(np.ceil((cv + r + grid.extent_v / 2) / grid.cell_size)) + 1)
    if iu0 >= iu1 or iv0 >= iv1:
        return grid

    iu, iv = np.meshgrid(np.arange(iu0, iu1), np.arange(iv0, iv1), indexing="ij")
    u, v = grid.cell_center_uv(iu, iv)
    du = u - cu
    dv = v - cv
    inside = du * du + dv * dv <= r * r
    if not np.any(inside):
        return grid

    weights = np.where(inside, 1.0, 0.0)
    if contact.pitch != 0.0:
        s = du * contact.travel_uv[0] + dv * contact.travel_uv[1]
        lead = inside & (s * np.sign(contact.pitch) > r / 2.0)
        weights[lead] += params.pitch_gain * abs(contact.pitch) / params.pitch_max

    cell_area = grid.cell_size ** 2
    pressure = contact.normal_force * weights / (weights.sum() * cell_area)  # Pa
    v_eff = contact.tangential_speed + params.orbital_speed                  # mm/s
    depth = params.k_preston * paper.efficiency * pressure * v_eff * dt      # µm

    sub = grid.coating[iu0:iu1, iv0:iv1]
    new = sub - depth
    overshoot = np.where(new < 0.0, -new, 0.0)
    grid.substrate_removal[iu0:iu1, iv0:iv1] += overshoot
    np.maximum(new, 0.0, out=new)
    grid.coating[iu0:iu1, iv0:iv1] = new
    return grid


def wear_update(paper: SandpaperState, dt: float, engaged: bool,
                params: MaterialParams) -> SandpaperState:
    """Engaged time accrues; efficiency falls linearly from 1 to eta_min over
    wear_time and floors there."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if not engaged:
        return paper
    usage = paper.usage_seconds + dt
    eff = max(params.eta_min, 1.0 - (1.0 - params.eta_min) * usage / params.wear_time)
    return SandpaperState(usage, eff)


def change_sandpaper(paper: SandpaperState) -> SandpaperState:
    return SandpaperState.fresh()


def coverage_metrics(grid: SurfaceGrid, params: MaterialParams) -> CoverageMetrics:
    cell_area = grid.cell_size ** 2
    target = grid.target_mask
    n_target = int(target.sum())
    done = target & (grid.coating < params.done_threshold)
    removed_fraction = float(done.sum()) / n_target if n_target else 1.0
    oversand = (grid.coating == 0.0) & (grid.substrate_removal > params.gouge_limit)
    undersand = target & (grid.coating >= params.done_threshold)
    removed_um = grid.initial_coating - grid.coating
    # µm thickness over m² cells -> mm³: 1e-3 mm * (1e3 mm)² per m²
    removed_volume = float(removed_um.sum()) * cell_area * 1e-3 * 1e6
    return CoverageMetrics(
        removed_fraction=removed_fraction,
        oversand_area=float(oversand.sum()) * cell_area,
        undersand_area=float(undersand.sum()) * cell_area,
        removed_volume=removed_volume,
    )
