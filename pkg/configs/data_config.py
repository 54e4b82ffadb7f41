# configs/data_config.py
import os
from pathlib import Path
from typing import Optional

from configs.app_config import PROJECT_ROOT
from configs.settings import DATA_DIR_ENV, MODEL_FILE_NAME, POPULATION_FILE_NAME
from core.csf_model import ModelParamSet
from core.population import PopulationModel
from utils.logger import setup_logger

logger = setup_logger(__name__)

BUNDLED_DATA_DIR = PROJECT_ROOT / "data"


def get_data_dir() -> Path:
    """
    Reference-data directory: RETINA_LIMIT_DATA_DIR if set, else the bundled data/
    """
    override = os.getenv(DATA_DIR_ENV)
    if override:
        return Path(override)
    return BUNDLED_DATA_DIR


def resolve_data_file(name: str, explicit: Optional[str] = None) -> Path:
    """Explicit path > RETINA_LIMIT_DATA_DIR > bundled data/"""
    path = Path(explicit) if explicit else get_data_dir() / name
    if not path.exists():
        raise FileNotFoundError(f"Reference data file not found: {path}")
    return path


def load_reference_model(model_file: Optional[str] = None) -> ModelParamSet:
    path = resolve_data_file(MODEL_FILE_NAME, model_file)
    logger.debug(f"Using model parameters from {path}")
    return ModelParamSet.load(path)


def load_reference_population(population_file: Optional[str] = None,
                              model: Optional[ModelParamSet] = None) -> PopulationModel:
    path = resolve_data_file(POPULATION_FILE_NAME, population_file)
    logger.debug(f"Using population table from {path}")
    return PopulationModel.load(path, model or load_reference_model())
