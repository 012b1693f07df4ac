from .settings import Settings, config, get_settings
from .logging_config import configure_logging
from .presets import PRESETS, get_preset, preset_names

__all__ = ["Settings", "config", "get_settings", "configure_logging", "PRESETS", "get_preset", "preset_names"]
