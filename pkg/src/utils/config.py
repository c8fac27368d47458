import os
import yaml
from typing import Any, Dict

PACKAGE_DIR = os.path.dirname(os.path.abspath(__file__))
CONFIG_PATH = os.path.join(PACKAGE_DIR, "config.yaml")
ASSETS_DIR = os.path.join(PACKAGE_DIR, "assets")


def load_config(path: str = CONFIG_PATH) -> Dict[str, Any]:
    """
    Reads the yaml config that holds every default of the package. Classes call this in
    their class body so the values become class attributes.
    """
    with open(path, "r") as f:
        return yaml.safe_load(f)
