from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional

class Settings(BaseSettings):
    PROJECT_NAME: str = "evmlink"

    # Output
    OUTPUT_DIR: str = "results"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Execution
    MAX_WORKERS: int = 1
    DEFAULT_SEED: int = 42
    CONFIG_FILE: Optional[str] = None

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="EVMLINK_",
        case_sensitive=True,
        extra="ignore",
    )

settings = Settings()
