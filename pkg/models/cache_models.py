"""Pydantic models and enums for the tile cache hierarchy."""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, validator


class WriteMissPolicy(str, Enum):
    """What a write miss does to the cache line it maps to."""

    WRITE_AROUND = "write_around"
    WRITE_ALLOCATE_NO_FETCH = "write_allocate_no_fetch"


class CacheMode(str, Enum):
    """Mode signal driven by the MM-Engine controller."""

    COVARIANCE = "covariance"
    ROTATION = "rotation"

    @property
    def write_miss_policy(self) -> WriteMissPolicy:
        if self is CacheMode.COVARIANCE:
            return WriteMissPolicy.WRITE_AROUND
        return WriteMissPolicy.WRITE_ALLOCATE_NO_FETCH


class CacheConfig(BaseModel):
    """Geometry and latency of one direct-mapped, tile-per-row cache."""

    rows: int
    tile_bytes: int = 0  # T*T*scalar width, informational
    dram_penalty: float = 10.0
    cache_hit_time: float = 1.0

    @validator("rows")
    def validate_rows(cls, v):
        if v < 1 or v & (v - 1):
            raise ValueError(f"cache rows must be a power of two, got {v}")
        return v

    @validator("dram_penalty")
    def validate_penalty(cls, v):
        if v < 1:
            raise ValueError(f"dram_penalty must be >= 1, got {v}")
        return v

    @validator("cache_hit_time")
    def validate_hit_time(cls, v):
        if v <= 0:
            raise ValueError(f"cache_hit_time must be positive, got {v}")
        return v

    @property
    def miss_latency(self) -> float:
        return self.dram_penalty * self.cache_hit_time

    @classmethod
    def for_tiles(cls, rows: int, t: int, scalar_bytes: int, dram_penalty: float = 10.0, cache_hit_time: float = 1.0) -> "CacheConfig":
        return cls(rows=rows, tile_bytes=t * t * scalar_bytes, dram_penalty=dram_penalty, cache_hit_time=cache_hit_time)


class CacheStatsRow(BaseModel):
    """One row of cache_stats.csv."""

    cache_id: str
    mode: str
    hits: int
    misses: int
    allocations: int
    writebacks: int
    measured_p: Optional[float] = None
    eat: Optional[float] = None
