"""Performance model configuration, reports and sweep rows."""
from typing import Dict, Optional

from pydantic import BaseModel, validator

from models.engine_models import CostingMode

PHASES = ("covariance", "jacobi", "projection")


class PerfModelConfig(BaseModel):
    """Assumed hit rate, memory penalty, clock and externally measured power."""

    hit_rate_assumed: float = 0.9
    dram_penalty: float = 10.0
    cache_hit_time: float = 1.0
    clock_hz: float = 200e6
    peak_power_w: Optional[float] = None
    costing: CostingMode = CostingMode.SEQUENTIAL

    @validator("hit_rate_assumed")
    def validate_hit_rate(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"hit rate must be in [0, 1], got {v}")
        return v

    @validator("dram_penalty")
    def validate_penalty(cls, v):
        if v < 1:
            raise ValueError(f"dram_penalty must be >= 1, got {v}")
        return v

    @validator("clock_hz")
    def validate_clock(cls, v):
        if v <= 0:
            raise ValueError(f"clock must be positive, got {v}")
        return v

    @validator("peak_power_w")
    def validate_power(cls, v):
        if v is not None and v < 0:
            raise ValueError(f"power must be non-negative, got {v}")
        return v


class PhaseCycles(BaseModel):
    load: float = 0.0
    compute: float = 0.0

    @property
    def total(self) -> float:
        return self.load + self.compute

    def add(self, load: float, compute: float) -> None:
        self.load += load
        self.compute += compute


class PerfReport(BaseModel):
    """Cycles per phase, wall time and energy of one (simulated or estimated) run.

    batches is the input-tile batch count M*N/(S*T^2); passes is the number of
    output-block passes of the covariance schedule.
    """

    phases: Dict[str, PhaseCycles]
    clock_hz: float
    peak_power_w: Optional[float] = None
    batches: int = 0
    passes: int = 0
    costing: CostingMode = CostingMode.SEQUENTIAL
    source: str = "simulated"

    @property
    def load_cycles(self) -> float:
        return sum(p.load for p in self.phases.values())

    @property
    def compute_cycles(self) -> float:
        return sum(p.compute for p in self.phases.values())

    @property
    def total_cycles(self) -> float:
        return self.load_cycles + self.compute_cycles

    @property
    def wall_time_s(self) -> float:
        return self.total_cycles / self.clock_hz

    @property
    def energy_j(self) -> Optional[float]:
        if self.peak_power_w is None:
            return None
        return self.peak_power_w * self.wall_time_s

    def rows(self) -> list:
        """perf.csv rows: one per phase plus a total."""
        out = []
        for name, cycles in self.phases.items():
            wall = cycles.total / self.clock_hz
            out.append({
                "phase": name,
                "cycles_load": cycles.load,
                "cycles_compute": cycles.compute,
                "cycles_total": cycles.total,
                "wall_time_s": wall,
                "energy_j": None if self.peak_power_w is None else self.peak_power_w * wall,
            })
        out.append({
            "phase": "total",
            "cycles_load": self.load_cycles,
            "cycles_compute": self.compute_cycles,
            "cycles_total": self.total_cycles,
            "wall_time_s": self.wall_time_s,
            "energy_j": self.energy_j,
        })
        return out


class HardwarePreset(BaseModel):
    name: str
    t: int
    s: int
    clock_mhz: float
    peak_power_w: float


HARDWARE_PRESETS: Dict[str, HardwarePreset] = {
    "artix7": HardwarePreset(name="artix7", t=4, s=8, clock_mhz=200.0, peak_power_w=1.271),
    "virtex-ultrascale": HardwarePreset(name="virtex-ultrascale", t=16, s=32, clock_mhz=434.0, peak_power_w=16.957),
}


class DseRow(BaseModel):
    """One row of dse.csv."""

    t: int
    s: int
    phase: str
    mode: str
    cycles_load: float
    cycles_compute: float
    cycles_total: float
    wall_time_s: float
    energy_j: Optional[float] = None


class BottleneckRow(BaseModel):
    """One row of bottleneck.csv."""

    regime: str
    records: int
    features: int
    matmul_cycles: float
    eigen_cycles: float
    matmul_share: float
    eigen_share: float


class WorkloadDims(BaseModel):
    """Input shape of an estimated run.

    k defaults to every component; sweeps is the Jacobi sweep count charged
    by the estimate.
    """

    records: int
    features: int
    k: Optional[int] = None
    sweeps: int = 15

    @validator("records", "features", "sweeps")
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError(f"must be >= 1, got {v}")
        return v

    @validator("k")
    def validate_k(cls, v, values):
        if v is None:
            return v
        features = values.get("features")
        if v < 1 or (features is not None and v > features):
            raise ValueError(f"k must be in [1, {features}], got {v}")
        return v

    @property
    def components(self) -> int:
        return self.k if self.k is not None else self.features
