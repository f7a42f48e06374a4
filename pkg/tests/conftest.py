import numpy as np
import pytest

from src.geometry.service import build_path
from src.idm.schemas import IdmParams, IidmParams
from src.profiles.schemas import PredictionConfig
from src.ropt.schemas import OptimizerConfig, RoptParams
from src.sim.scenario import build_t_intersection
from src.sim.schemas import RunConfig, ScenarioConfig

SCENARIO_FILE = "scenarios/t_intersection.json"


# 1. Geometry shared by most tests
@pytest.fixture(scope="session")
def straight_road():
    """200 m straight road along the x axis, sampled every 0.5 m."""
    xs = np.linspace(0.0, 200.0, 401)
    return build_path(np.column_stack((xs, np.zeros_like(xs))), name="road")


@pytest.fixture(scope="session")
def circle_path():
    """Half circle of radius 10 m (left turn)."""
    angles = np.linspace(-0.5 * np.pi, 0.5 * np.pi, 200)
    return build_path(np.column_stack((10.0 * np.cos(angles), 10.0 * np.sin(angles))), name="circle")


@pytest.fixture(scope="session")
def t_scene():
    """Default analytic T-intersection; building it once keeps the suite fast."""
    return build_t_intersection(ScenarioConfig())


# 2. Parameter sets
@pytest.fixture
def prediction():
    return PredictionConfig()


@pytest.fixture
def fast_ropt():
    """
    Cheap ROPT parameters: two ramp candidates and a short simplex budget.
    Enough to exercise selection and continuation without the full cost.
    """
    return RoptParams(optimizer=OptimizerConfig(k=2, max_iterations=15, tolerance=1e-2))


@pytest.fixture
def run_config():
    return RunConfig(idm=IdmParams(), iidm=IidmParams())
