"""Configuration management for the MANOJAVAM simulator."""
from typing import Optional
from pydantic import BaseSettings, validator


class Settings(BaseSettings):
    """Simulator defaults loaded from environment variables (prefix MANOJAVAM_)."""

    # Worker fan-out per pass (MANOJAVAM_SIM_THREADS)
    sim_threads: int = 1
    log_level: str = "INFO"

    # MM-Engine geometry
    tile_size: int = 4
    parallelism: int = 8

    # Cache hierarchy
    lhs_cache_rows: int = 256
    rhs_cache_rows: int = 64
    dram_penalty: float = 10.0
    cache_hit_time: float = 1.0

    # Fixed-point datapath
    q_format: str = "16.16"
    cordic_iterations: Optional[int] = None  # None: one iteration per fraction bit

    # Jacobian unit
    sweep_budget: int = 50
    saturation_limit: int = 4096  # saturations tolerated per sweep

    # Performance model
    clock_mhz: float = 200.0
    peak_power_w: Optional[float] = None

    output_dir: str = "out"

    @validator("sim_threads")
    def validate_threads(cls, v):
        """Clamp to at least one worker."""
        return max(1, v)

    @validator("tile_size")
    def validate_tile_size(cls, v):
        if v < 2:
            raise ValueError("TILE_SIZE must be at least 2")
        return v

    @validator("parallelism")
    def validate_parallelism(cls, v):
        if v < 1:
            raise ValueError("PARALLELISM must be at least 1")
        return v

    @validator("lhs_cache_rows", "rhs_cache_rows")
    def validate_cache_rows(cls, v):
        """Direct-mapped caches are indexed by a power-of-two row count."""
        if v < 1 or v & (v - 1):
            raise ValueError(f"cache rows must be a power of two, got {v}")
        return v

    @validator("q_format")
    def validate_q_format(cls, v):
        """Accept 'I.F' with integer and fraction bit counts."""
        parts = v.split(".")
        if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
            raise ValueError(f"Q_FORMAT must look like I.F (e.g. 16.16), got {v!r}")
        return v.strip()

    class Config:
        env_prefix = "MANOJAVAM_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False


APP_NAME = "MANOJAVAM Simulator"
APP_VERSION = "1.0.0"

# Global settings instance
settings = Settings()
