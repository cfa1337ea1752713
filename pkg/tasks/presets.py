import logging

import yaml

from config.settings import settings

logger = logging.getLogger(__name__)


def load_presets() -> dict[str, dict]:
    """Load the named presets from YAML."""
    with open(settings.presets_yaml_path, "r") as f:
        data = yaml.safe_load(f)
    return data.get("presets", {})


def get_preset(name: str) -> dict:
    presets = load_presets()
    if name not in presets:
        raise KeyError(f"Unknown preset {name!r}; available: {', '.join(sorted(presets))}")
    return dict(presets[name])
