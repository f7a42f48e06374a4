from functools import lru_cache
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict

from src.common.settings import ENV_PATH


class AppSettings(BaseSettings):
    # CLI defaults
    OUT_DIR: str = "results"
    SCENARIO_FILE: str | None = None
    PROFILE: Literal["desk", "paper", "full"] = "desk"
    BASE_SEED: int = 0

    model_config = SettingsConfigDict(
        env_prefix="MERGESIM_",
        env_file=str(ENV_PATH),
        env_file_encoding='utf-8',
        extra='ignore'
    )

@lru_cache()
def get_app_settings():
    return AppSettings()
