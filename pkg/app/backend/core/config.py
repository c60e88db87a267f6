"""
Contains configurations
"""

# settings.py
from functools import lru_cache
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Settings for the permutation-test library and CLI."""
    # ------------------------------------------------------------------
    # Runtime
    # ------------------------------------------------------------------
    PERMTEST_SEED: int = 20240917
    PERMTEST_THREADS: int = 1
    PERMTEST_CHUNK_SIZE: int = 50
    PERMTEST_LOG_LEVEL: str = "INFO"

    # ------------------------------------------------------------------
    # Numerics
    # ------------------------------------------------------------------
    PERMTEST_RANK_TOL: float = 1e-10
    PERMTEST_MAX_ENUMERATION: int = 10**6

    # ------------------------------------------------------------------
    # Group optimizer
    # ------------------------------------------------------------------
    PERMTEST_PARTITION_EPSILON: float = 0.05
    PERMTEST_MIN_BLOCK_EXPONENT: float = 0.55
    PERMTEST_TOPUP_EXPONENT: float = 0.9
    PERMTEST_SPLIT_EXPONENT: float = 0.55

    class Config:
        env_file = ".env"
        case_sensitive = True


@lru_cache
def get_settings() -> Settings:
    """
    Get library settings, environment variables taking precedence.

    Returns:
        Settings: Configured settings instance
    """
    return Settings()


settings = get_settings()
