import os
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Type

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


def _available_cores() -> int:
    return os.cpu_count() or 1


class Settings(BaseSettings):
    """Runtime settings, read from DIDLAB_* environment variables and an optional .env file."""

    model_config = SettingsConfigDict(env_prefix="DIDLAB_", env_file=".env", extra="ignore")

    env: str = "development"
    log_level: str = "INFO"
    log_json: bool = False

    # Monte Carlo defaults
    workers: int = Field(default_factory=_available_cores, ge=1)
    chunks_per_worker: int = Field(default=4, ge=1)
    default_reps: int = Field(default=5000, ge=1)
    default_level: float = Field(default=0.05, gt=0.0, lt=1.0)
    progress: bool = True

    # Outputs
    run_dir: Path = Path("runs")

    # HTTP surface
    api_host: str = "127.0.0.1"
    api_port: int = 5000
    api_max_reps: int = Field(default=2000, ge=1)


class DevelopmentSettings(Settings):
    env: str = "development"
    log_level: str = "DEBUG"


class ProductionSettings(Settings):
    env: str = "production"
    log_level: str = "WARNING"
    log_json: bool = True
    progress: bool = False


class TestingSettings(Settings):
    env: str = "testing"
    log_level: str = "WARNING"
    workers: int = 1
    progress: bool = False
    default_reps: int = 200


config: Dict[str, Type[Settings]] = {
    "development": DevelopmentSettings,
    "production": ProductionSettings,
    "testing": TestingSettings,
    "default": DevelopmentSettings,
}


@lru_cache(maxsize=None)
def get_settings(env: Optional[str] = None) -> Settings:
    name = env or os.environ.get("DIDLAB_ENV", "default")
    settings_cls = config.get(name, config["default"])
    return settings_cls()
