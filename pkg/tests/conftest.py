import json
from pathlib import Path

import numpy as np
import pytest

from sandbench.geometry import Pose
from sandbench.kinematics import RobotModel
from sandbench.surface import MaterialParams, SurfaceGrid

REPO = Path(__file__).resolve().parent.parent
SCENARIOS = REPO / "scenarios"


@pytest.fixture(scope="session")
def robot():
    return RobotModel.default()


@pytest.fixture
def material():
    return MaterialParams()


@pytest.fixture
def flat_grid():
    return SurfaceGrid(nu=120, nv=90, cell_size=0.002, kind="flat",
                       object_pose=Pose.identity(), coating=100.0)


@pytest.fixture
def curved_grid():
    return SurfaceGrid(nu=200, nv=100, cell_size=0.002, kind="cylinder",
                       curvature_radius=0.8,
                       object_pose=Pose.from_xyz_rotvec([0.6, 0.0, 0.1], [0, 0, 0]),
                       coating=100.0)


def load_json(path):
    with open(path) as f:
        return json.load(f)


def scenario_path(name: str) -> str:
    return str(SCENARIOS / name)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
