"""Pydantic request models for the HTTP service."""
from typing import List, Optional

from pydantic import BaseModel, validator

from models.perf_models import WorkloadDims
from models.run_models import RunConfig
from utils.datasets import BENCHMARK_DATASETS


def _check_rectangular(rows: List[List[float]]) -> List[List[float]]:
    if not rows or not rows[0]:
        raise ValueError("matrix must have at least one row and one column")
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"row {i} has {len(row)} entries, expected {width}")
    return rows


class MatMulRequest(BaseModel):
    """Two operands (row lists) and the run knobs."""
    a: List[List[float]]
    b: List[List[float]]
    config: RunConfig = RunConfig()
    verify: bool = False

    _rect_a = validator("a", allow_reuse=True)(_check_rectangular)
    _rect_b = validator("b", allow_reuse=True)(_check_rectangular)


class PcaRequest(BaseModel):
    """Data matrix (records x features) and the run knobs."""
    data: List[List[float]]
    config: RunConfig = RunConfig()
    verify: bool = False

    _rect = validator("data", allow_reuse=True)(_check_rectangular)


class EstimateRequest(BaseModel):
    """Either a named benchmark dataset or explicit dims."""
    dataset: Optional[str] = None
    dims: Optional[WorkloadDims] = None
    config: RunConfig = RunConfig()

    @validator("dataset")
    def validate_dataset(cls, v):
        if v is not None and v not in BENCHMARK_DATASETS:
            raise ValueError(f"unknown dataset {v!r}; choose from {sorted(BENCHMARK_DATASETS)}")
        return v

    def workload(self) -> WorkloadDims:
        if self.dims is not None:
            return self.dims
        if self.dataset is None:
            raise ValueError("give a dataset name or dims")
        d = BENCHMARK_DATASETS[self.dataset]
        return WorkloadDims(records=d.records, features=d.features)
