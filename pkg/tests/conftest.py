import numpy as np
import pytest

from riskfield.config import AblationConfig, EngineConfig, GridConfig, VisibilityConfig
from riskfield.fixtures import load_fixture
from riskfield.scenario import AgentState


def make_car(aid="car", x=0.0, y=0.0, heading=0.0, speed=10.0, length=4.6, width=1.8, mass=1500.0):
    return AgentState(aid, "car", x, y, heading, speed, length, width, mass)


def make_ped(aid="ped", x=0.0, y=0.0, heading=0.0, speed=1.4):
    return AgentState(aid, "pedestrian", x, y, heading, speed, 0.6, 0.6, None)


@pytest.fixture(scope="session")
def cut_in_seq():
    return load_fixture("cut_in")


@pytest.fixture(scope="session")
def intersection_seq():
    return load_fixture("intersection")


@pytest.fixture(scope="session")
def ped_crossing_seq():
    return load_fixture("ped_crossing")


@pytest.fixture(scope="session")
def straight_road_seq():
    return load_fixture("straight_road")


@pytest.fixture(scope="session")
def wall_seq():
    return load_fixture("wall")


@pytest.fixture(scope="session")
def eval_config():
    """Reduced-resolution engine config for pipeline-level tests (same
    behavior, ~10x faster than the 400x400 default)."""
    return EngineConfig(
        grid=GridConfig(extent=30.0, resolution=0.5),
        visibility=VisibilityConfig(ray_count=180, max_range=30.0),
    )


def eval_config_with(**ablation) -> EngineConfig:
    return EngineConfig(
        grid=GridConfig(extent=30.0, resolution=0.5),
        visibility=VisibilityConfig(ray_count=180, max_range=30.0),
        ablation=AblationConfig(**ablation),
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
