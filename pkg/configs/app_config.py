import os
from pathlib import Path

import yaml
from dotenv import load_dotenv, find_dotenv

from configs.settings import CONFIG_PATH_ENV

# Load environment variables (RETINA_LIMIT_*) from a .env file when present
env_path = find_dotenv(usecwd=True)
if env_path:
    load_dotenv(env_path)

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG_PATH = PROJECT_ROOT / "configs" / "config.yaml"

_config_cache = {}


def load_config(config_path=None) -> dict:
    """Load configuration from YAML file (cached per path)"""
    path = Path(config_path or os.getenv(CONFIG_PATH_ENV) or DEFAULT_CONFIG_PATH)

    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    key = str(path.resolve())
    if key not in _config_cache:
        with open(path, 'r', encoding='utf-8') as f:
            _config_cache[key] = yaml.safe_load(f) or {}

    return _config_cache[key]


def get_display_preset(name: str, config_path=None) -> dict:
    """Return the display preset dictionary registered under `name`"""
    displays = load_config(config_path).get("displays", {})
    if name not in displays:
        raise KeyError(f"Unknown display preset '{name}'. Available: {sorted(displays)}")
    return dict(displays[name])
