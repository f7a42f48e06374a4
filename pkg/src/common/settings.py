from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache

# Calculate the Project Root dynamically
CURRENT_FILE = Path(__file__).resolve()
PROJECT_ROOT = CURRENT_FILE.parent.parent.parent

# Optional .env file; every field has a default
ENV_PATH = PROJECT_ROOT / "deployments" / "env" / ".env"

class Settings(BaseSettings):
    # App Config
    APP_NAME: str = "ROPT Merge Simulator"
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"
    LOG_FILENAME: str = "mergesim.jsonl"

    # Sweep Config
    WORKERS: int = 1                       # Max simultaneous episode processes
    EPISODE_TIMEOUT_SECONDS: int = 1800    # Wall-clock cap per episode job

    # Pydantic V2 Configuration
    model_config = SettingsConfigDict(
        env_prefix="MERGESIM_",     # MERGESIM_WORKERS=8 etc.
        env_file=str(ENV_PATH),
        env_file_encoding='utf-8',
        extra='ignore'
    )

@lru_cache()
def get_settings():
    return Settings()
