"""PCA pipeline types: standardization, component selection, output."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, validator

from models.engine_models import PassTrace
from models.jacobi_models import JacobiResult
from models.perf_models import PerfReport
from utils.matrix import Matrix


class CriterionKind(str, Enum):
    EVCR_FLOOR = "evcr"
    CVCR_TARGET = "cvcr"
    FIXED_K = "k"


class SelectionCriterion(BaseModel):
    """How many components to keep: 'evcr:0.05', 'cvcr:0.95' or 'k:3'."""

    kind: CriterionKind = CriterionKind.CVCR_TARGET
    value: float = 0.95

    @validator("value")
    def validate_value(cls, v, values):
        kind = values.get("kind")
        if kind == CriterionKind.FIXED_K:
            if v < 1 or int(v) != v:
                raise ValueError(f"k must be a positive integer, got {v}")
        elif not 0.0 < v <= 1.0:
            raise ValueError(f"{kind.value if kind else 'ratio'} threshold must be in (0, 1], got {v}")
        return v

    @classmethod
    def parse(cls, text: str) -> "SelectionCriterion":
        try:
            kind, raw = text.strip().split(":", 1)
            return cls(kind=CriterionKind(kind.strip().lower()), value=float(raw))
        except ValueError as e:
            raise ValueError(f"selection must look like evcr:t, cvcr:t or k:n, got {text!r} ({e})")

    def __str__(self) -> str:
        if self.kind == CriterionKind.FIXED_K:
            return f"k:{int(self.value)}"
        return f"{self.kind.value}:{self.value}"


@dataclass
class StandardizationParams:
    mu: np.ndarray
    sigma: np.ndarray
    zero_variance: List[int] = field(default_factory=list)


@dataclass
class ComponentSelection:
    evcr: np.ndarray
    cvcr: np.ndarray
    k: int
    criterion: SelectionCriterion
    eigenvalues: Optional[np.ndarray] = None


@dataclass
class PcaOutput:
    projected: Matrix
    selection: ComponentSelection
    jacobi: JacobiResult
    perf: PerfReport
    standardization: Optional[StandardizationParams] = None
    oracle_projector_distance: Optional[float] = None
    cache_stats: List[Dict[str, object]] = field(default_factory=list)
    pass_trace: List[PassTrace] = field(default_factory=list)
