"""Jacobian-unit configuration and results."""
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, validator

from utils.matrix import Matrix

# Scalars in a pivot record are floats on the real path, raw codes on the fixed path
Scalar = Union[float, int]


class PivotStrategy(str, Enum):
    MAX_PIVOT = "max"
    CYCLIC_ROWWISE = "cyclic"


class JacobiConfig(BaseModel):
    """Knobs of the sweep loop. epsilon 0 means budget-only operation.

    rotation_budget additionally caps the total number of rotations; the sweep
    in progress ends where it runs out. guard_bits is the number of extra
    fraction bits the fixed-point rotation datapath keeps on C and V.
    """

    sweep_budget: int = 50
    epsilon: float = 0.0
    pivot_strategy: PivotStrategy = PivotStrategy.MAX_PIVOT
    sparse_rotations: bool = False
    saturation_limit: int = 4096
    symmetry_tolerance: float = 1e-9
    cordic_iterations: Optional[int] = None
    record_rotations: bool = False
    rotation_budget: Optional[int] = None
    guard_bits: int = 12

    @validator("sweep_budget")
    def validate_budget(cls, v):
        if v < 1:
            raise ValueError(f"sweep_budget must be >= 1, got {v}")
        return v

    @validator("rotation_budget")
    def validate_rotation_budget(cls, v):
        if v is not None and v < 1:
            raise ValueError(f"rotation_budget must be >= 1, got {v}")
        return v

    @validator("guard_bits")
    def validate_guard_bits(cls, v):
        if v < 0:
            raise ValueError(f"guard_bits must be >= 0, got {v}")
        return v

    @validator("epsilon", "symmetry_tolerance")
    def validate_non_negative(cls, v):
        if v < 0:
            raise ValueError("tolerances must be non-negative")
        return v


@dataclass(frozen=True)
class PivotRecord:
    c_pq: Scalar
    c_pp: Scalar
    c_qq: Scalar
    p: int
    q: int

    @property
    def magnitude(self) -> Scalar:
        return abs(self.c_pq)


@dataclass(frozen=True)
class RotationAngles:
    """theta, sin and cos in the matrix's scalar domain."""

    theta: Scalar
    sin_theta: Scalar
    cos_theta: Scalar
    degenerate: bool = False


@dataclass
class RotationRecord:
    slot: int
    p: int
    q: int
    theta: float
    c_pq: float


class ConvergenceRow(BaseModel):
    """One row of convergence.csv."""

    sweep: int
    e_off: float
    e_off_relative: float
    max_pivot_magnitude: float
    rotations_so_far: int


@dataclass
class JacobiResult:
    eigenvalues: np.ndarray
    eigenvectors: Matrix
    e_off_trace: List[float]
    sweeps_executed: int
    rotations_executed: int
    convergence: List[ConvergenceRow] = field(default_factory=list)
    cycles: float = 0.0
    load_cycles: float = 0.0
    compute_cycles: float = 0.0
    saturation_events: int = 0
    givens_tile_writes: int = 0
    rotations: List[RotationRecord] = field(default_factory=list)

    @property
    def e_off_relative(self) -> List[float]:
        base = self.e_off_trace[0] if self.e_off_trace else 0.0
        if base == 0.0:
            return [0.0 for _ in self.e_off_trace]
        return [e / base for e in self.e_off_trace]
