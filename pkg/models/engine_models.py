"""Engine geometry, pass plans and matmul results."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, validator

from utils.matrix import Matrix


class CostingMode(str, Enum):
    """How per-array work inside one pass is charged.

    SEQUENTIAL charges every array's loads and tile products one after
    another (worst case); PARALLEL charges the LHS broadcast plus the
    slowest array.
    """

    SEQUENTIAL = "sequential"
    PARALLEL = "parallel"


class EngineConfig(BaseModel):
    """S systolic arrays of TxT processing elements."""

    t: int = 4
    s: int = 8

    @validator("t")
    def validate_t(cls, v):
        if v < 2:
            raise ValueError(f"tile size T must be >= 2, got {v}")
        return v

    @validator("s")
    def validate_s(cls, v):
        if v < 1:
            raise ValueError(f"parallelism S must be >= 1, got {v}")
        return v

    @property
    def tile_cycles(self) -> int:
        """Fill, compute and drain of one TxT output-stationary tile product."""
        return 3 * self.t - 2


@dataclass(frozen=True)
class PassSpec:
    pass_id: int
    row_block: int
    column_blocks: Tuple[int, ...]
    tiles_per_block: int

    @property
    def active_arrays(self) -> int:
        return len(self.column_blocks)


@dataclass
class PassPlan:
    """Row-major schedule of passes over an output tile grid."""

    passes: List[PassSpec]
    row_blocks: int
    column_blocks: int
    tiles_per_block: int
    s: int

    @property
    def pass_count(self) -> int:
        return len(self.passes)

    @property
    def tile_products(self) -> int:
        return self.row_blocks * self.column_blocks * self.tiles_per_block

    def block_pairs(self) -> List[Tuple[int, int]]:
        return [(p.row_block, bc) for p in self.passes for bc in p.column_blocks]


@dataclass
class PassTrace:
    """Per-pass cycle and cache accounting (one row of pass_trace.csv)."""

    pass_id: int
    row_block: int
    column_blocks: Tuple[int, ...]
    cycles: float
    load_cycles: float
    compute_cycles: float
    lhs_hits: int = 0
    lhs_misses: int = 0
    rhs_hits: int = 0
    rhs_misses: int = 0

    def as_row(self) -> Dict[str, object]:
        return {
            "pass_id": self.pass_id,
            "row_block": self.row_block,
            "column_blocks": " ".join(str(c) for c in self.column_blocks),
            "cycles": self.cycles,
            "lhs_hits": self.lhs_hits,
            "lhs_misses": self.lhs_misses,
            "rhs_hits": self.rhs_hits,
            "rhs_misses": self.rhs_misses,
        }


@dataclass
class AccessCounts:
    """Memory traffic of one matmul, split by direction."""

    reads: int = 0
    read_hits: int = 0
    writes: int = 0
    write_hits: int = 0
    tile_products: int = 0

    @property
    def read_misses(self) -> int:
        return self.reads - self.read_hits

    @property
    def write_misses(self) -> int:
        return self.writes - self.write_hits

    def merge(self, other: "AccessCounts") -> None:
        self.reads += other.reads
        self.read_hits += other.read_hits
        self.writes += other.writes
        self.write_hits += other.write_hits
        self.tile_products += other.tile_products


@dataclass
class MatMulResult:
    product: Matrix
    cycles: float
    load_cycles: float
    compute_cycles: float
    plan: PassPlan
    counts: AccessCounts
    cache_stats: List[Dict[str, object]] = field(default_factory=list)
    trace: List[PassTrace] = field(default_factory=list)
    saturation_events: int = 0


@dataclass
class RotationUpdateResult:
    c: Matrix
    v: Matrix
    cycles: float
    load_cycles: float
    compute_cycles: float
    counts: AccessCounts
    saturation_events: int = 0
    steps: Optional[List[MatMulResult]] = None
