import os

# No log files from test runs
os.environ["RETINA_LIMIT_LOG_DIR"] = ""

import pytest

from configs.app_config import get_display_preset
from configs.data_config import BUNDLED_DATA_DIR, load_reference_model, load_reference_population
from core.color_space import ColorPipeline
from core.units import DisplayGeometry
from utils.scene import natural_scene


@pytest.fixture(scope="session")
def model():
    return load_reference_model()


@pytest.fixture(scope="session")
def population(model):
    return load_reference_population(model=model)


@pytest.fixture(scope="session")
def pipeline():
    return ColorPipeline.from_config()


@pytest.fixture(scope="session")
def scene():
    return natural_scene(256, 256)


@pytest.fixture
def eizo():
    return DisplayGeometry.from_preset(get_display_preset("eizo_cs2740"), 1.40)


@pytest.fixture
def table_b_csv():
    return BUNDLED_DATA_DIR / "table_b_means.csv"
