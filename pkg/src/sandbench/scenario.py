"""Scenario ingestion: schema-validated JSON documents that fully describe a
session (robot, workpiece, workflow, calibration overrides, noise/seed)."""

from __future__ import annotations

import json
from importlib import resources

import jsonschema
import numpy as np

from .corrections import DEFAULT_COUPLING, SaturationSet
from .errors import SchemaError
from .geometry import Pose, quat_from_rotvec
from .kinematics import JointConfig, RobotModel
from .perception import CameraModel
from .programs import NominalParameters, load_structured_model
from .session import Session, WorkflowKind
from .surface import MaterialParams, SurfaceGrid


def scenario_schema() -> dict:
    text = resources.files("sandbench").joinpath("data/scenario.schema.json").read_text()
    return json.loads(text)


def validate_scenario(doc: dict) -> None:
    try:
        jsonschema.validate(doc, scenario_schema())
    except jsonschema.ValidationError as e:
        raise SchemaError(f"scenario invalid: {e.message}") from e


def load_scenario(path: str) -> dict:
    with open(path) as f:
        doc = json.load(f)
    validate_scenario(doc)
    return doc


def _pose_from(doc: dict | None) -> Pose:
    if not doc:
        return Pose.identity()
    return Pose(np.array(doc.get("position", [0, 0, 0]), dtype=float),
                np.array(doc.get("quat", [1, 0, 0, 0]), dtype=float))


def _build_grid(doc: dict, material: MaterialParams) -> SurfaceGrid:
    wp = doc["workpiece"]
    coating = wp.get("coating", material.coating_default)
    if isinstance(coating, list):
        coating = np.array(coating, dtype=float)
    grid = SurfaceGrid(
        nu=wp["nu"], nv=wp["nv"], cell_size=wp["cell_size"], kind=wp["kind"],
        curvature_radius=wp.get("curvature_radius"),
        object_pose=_pose_from(wp.get("pose")),
        coating=coating,
    )
    target = wp.get("target", "all")
    if target == "all":
        return grid
    if "cells" in target:
        grid.target_mask = np.array(target["cells"], dtype=bool).reshape(grid.nu, grid.nv)
        return grid
    mask = np.zeros((grid.nu, grid.nv), dtype=bool)
    iu, iv = np.meshgrid(np.arange(grid.nu), np.arange(grid.nv), indexing="ij")
    u, v = grid.cell_center_uv(iu, iv)
    for u0, v0, u1, v1 in target["rects"]:
        mask |= (u >= u0) & (u <= u1) & (v >= v0) & (v <= v1)
    grid.target_mask = mask
    return grid


def _build_camera(doc: dict) -> CameraModel:
    cam = doc.get("camera", {})
    kwargs = {}
    for key in ("width", "height", "range_min", "range_max", "stride"):
        if key in cam:
            kwargs[key] = cam[key]
    if "fov_x_deg" in cam:
        kwargs["fov_x"] = np.deg2rad(cam["fov_x_deg"])
    if "fov_y_deg" in cam:
        kwargs["fov_y"] = np.deg2rad(cam["fov_y_deg"])
    return CameraModel(**kwargs)


def build_session(doc: dict, seed_override: int | None = None) -> Session:
    """Construct a fresh Session from a validated scenario document."""
    validate_scenario(doc)
    robot_doc = doc.get("robot", "default")
    robot = RobotModel.default() if robot_doc == "default" else RobotModel.from_dict(robot_doc)
    material = MaterialParams().with_overrides(doc.get("material", {}))
    grid = _build_grid(doc, material)
    camera = _build_camera(doc)
    workflow = WorkflowKind(doc["workflow"])

    scan = doc.get("scan", {})
    pan_configs = [JointConfig(np.array(c, dtype=float)) for c in scan.get("pan_configs", [])]
    view_config = JointConfig(np.array(doc.get("view_config", robot.home), dtype=float))
    if not pan_configs:
        pan_configs = [view_config]

    reg = doc.get("registration", {}).get("init_offset", {})
    init_offset = Pose(np.array(reg.get("translation", [0, 0, 0]), dtype=float),
                       quat_from_rotvec(np.array(reg.get("rotvec", [0, 0, 0]), dtype=float)))

    corr = doc.get("corrections", {})
    saturation = SaturationSet(**corr.get("saturation", {}))
    coupling = tuple(corr.get("coupling", DEFAULT_COUPLING))

    seed = seed_override if seed_override is not None else doc.get("seed", 0)

    session = Session(
        workflow=workflow,
        robot=robot,
        grid=grid,
        material=material,
        camera=camera,
        pan_configs=pan_configs,
        view_config=view_config,
        noise_sigma=scan.get("noise_sigma", 0.002),
        seed=seed,
        registration_init_offset=init_offset,
        saturation=saturation,
        coupling=coupling,
    )

    if workflow is WorkflowKind.STRUCTURED:
        model_doc = doc.get("structured_model", {"geometry_id": "workpiece"})
        geometry_id = model_doc["geometry_id"]
        library = {
            geometry_id: {
                "geometry": grid,
                "disc_radius": material.disc_radius,
                "nominal": NominalParameters.from_dict(model_doc.get("nominal", {})),
                "margin": model_doc.get("margin", 0.0),
                "waypoint_spacing": model_doc.get("waypoint_spacing", 0.025),
                "initial_pose": Pose.identity(),
            }
        }
        session.structured_library = library
        session.structured_geometry_id = geometry_id
        session.program = load_structured_model(geometry_id, library)
    else:
        defaults = doc.get("unstructured", {}).get("default_params")
        if defaults:
            session.params = NominalParameters.from_dict(defaults)

    return session
