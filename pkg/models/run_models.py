"""Fully resolved per-run configuration shared by the CLI and the API."""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, validator

from config import settings
from models.cache_models import CacheConfig
from models.engine_models import CostingMode, EngineConfig
from models.jacobi_models import JacobiConfig, PivotStrategy
from models.pca_models import SelectionCriterion
from models.perf_models import HARDWARE_PRESETS, PerfModelConfig
from utils.numerics import CordicConfig, QFormat


class NumericPath(str, Enum):
    FLOAT = "float"
    FIXED = "fixed"


class RunConfig(BaseModel):
    """Every knob that affects a run's output; written verbatim to the manifest."""

    t: int = settings.tile_size
    s: int = settings.parallelism
    path: NumericPath = NumericPath.FLOAT
    q_format: str = settings.q_format
    cordic_iterations: Optional[int] = settings.cordic_iterations
    sweep_budget: int = settings.sweep_budget
    rotation_budget: Optional[int] = None
    guard_bits: int = 12
    pivot_strategy: PivotStrategy = PivotStrategy.MAX_PIVOT
    epsilon: float = 0.0
    sparse_rotations: bool = False
    saturation_limit: int = settings.saturation_limit
    lhs_cache_rows: int = settings.lhs_cache_rows
    rhs_cache_rows: int = settings.rhs_cache_rows
    dram_penalty: float = settings.dram_penalty
    cache_hit_time: float = settings.cache_hit_time
    selection: str = "cvcr:0.95"
    standardize: bool = True
    clock_mhz: float = settings.clock_mhz
    peak_power_w: Optional[float] = settings.peak_power_w
    preset: Optional[str] = None
    costing: CostingMode = CostingMode.SEQUENTIAL
    hit_rate_assumed: float = 0.9
    threads: int = settings.sim_threads
    seed: int = 0

    @validator("t")
    def validate_t(cls, v):
        if v < 2:
            raise ValueError(f"tile size must be >= 2, got {v}")
        return v

    @validator("s", "threads")
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @validator("q_format")
    def validate_q_format(cls, v):
        QFormat.parse(v)
        return v

    @validator("cordic_iterations")
    def validate_cordic(cls, v):
        if v is not None and v < 4:
            raise ValueError(f"CORDIC needs at least 4 iterations, got {v}")
        return v

    @validator("sweep_budget")
    def validate_sweeps(cls, v):
        if v < 1:
            raise ValueError(f"sweep budget must be >= 1, got {v}")
        return v

    @validator("epsilon")
    def validate_epsilon(cls, v):
        if v < 0:
            raise ValueError(f"epsilon must be >= 0, got {v}")
        return v

    @validator("lhs_cache_rows", "rhs_cache_rows")
    def validate_cache_rows(cls, v):
        if v < 1 or v & (v - 1):
            raise ValueError(f"cache rows must be a power of two, got {v}")
        return v

    @validator("selection")
    def validate_selection(cls, v):
        SelectionCriterion.parse(v)
        return v

    @validator("preset")
    def validate_preset(cls, v):
        if v is not None and v not in HARDWARE_PRESETS:
            raise ValueError(f"unknown preset {v!r}; choose from {sorted(HARDWARE_PRESETS)}")
        return v

    @validator("hit_rate_assumed")
    def validate_hit_rate(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"hit rate must be in [0, 1], got {v}")
        return v

    def with_preset(self) -> "RunConfig":
        """Fill T, S, clock and power from the named preset unless set explicitly."""
        if self.preset is None:
            return self
        hw = HARDWARE_PRESETS[self.preset]
        values = {"t": hw.t, "s": hw.s, "clock_mhz": hw.clock_mhz, "peak_power_w": hw.peak_power_w}
        return self.copy(update={k: v for k, v in values.items() if k not in self.__fields_set__})

    @property
    def qformat(self) -> Optional[QFormat]:
        """None selects the real-valued path."""
        if self.path == NumericPath.FLOAT:
            return None
        return QFormat.parse(self.q_format)

    @property
    def criterion(self) -> SelectionCriterion:
        return SelectionCriterion.parse(self.selection)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(t=self.t, s=self.s)

    def jacobi_config(self) -> JacobiConfig:
        return JacobiConfig(
            sweep_budget=self.sweep_budget,
            epsilon=self.epsilon,
            pivot_strategy=self.pivot_strategy,
            sparse_rotations=self.sparse_rotations,
            saturation_limit=self.saturation_limit,
            cordic_iterations=self.cordic_iterations,
            rotation_budget=self.rotation_budget,
            guard_bits=self.guard_bits,
        )

    def cordic_config(self) -> Optional[CordicConfig]:
        fmt = self.qformat
        if fmt is None:
            return None
        return CordicConfig.for_format(fmt, self.cordic_iterations)

    def cache_configs(self):
        """(lhs, rhs) cache configurations."""
        fmt = self.qformat
        scalar_bytes = 8 if fmt is None else (fmt.total_bits + 7) // 8
        lhs = CacheConfig.for_tiles(self.lhs_cache_rows, self.t, scalar_bytes, self.dram_penalty, self.cache_hit_time)
        rhs = CacheConfig.for_tiles(self.rhs_cache_rows, self.t, scalar_bytes, self.dram_penalty, self.cache_hit_time)
        return lhs, rhs

    def perf_model(self) -> PerfModelConfig:
        return PerfModelConfig(
            hit_rate_assumed=self.hit_rate_assumed,
            dram_penalty=self.dram_penalty,
            cache_hit_time=self.cache_hit_time,
            clock_hz=self.clock_mhz * 1e6,
            peak_power_w=self.peak_power_w,
            costing=self.costing,
        )
