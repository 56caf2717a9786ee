"""Simulation endpoints: engine matmul, end-to-end PCA and analytical estimates."""
import logging
from typing import Any, Dict

import numpy as np
from fastapi import APIRouter

from models.api_models import EstimateRequest, MatMulRequest, PcaRequest
from models.cache_models import CacheMode
from models.perf_models import PerfReport
from services.cache_service import CacheHierarchy
from services.engine_service import MMEngine
from services.pca_service import run_configured
from services.perf_service import estimate_cycles
from utils.matrix import Matrix
from utils.oracle import oracle_matmul

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/simulate", tags=["simulate"])


def _perf_payload(report: PerfReport) -> Dict[str, Any]:
    return {
        "source": report.source,
        "costing": report.costing.value,
        "phases": report.rows(),
        "total_cycles": report.total_cycles,
        "wall_time_s": report.wall_time_s,
        "energy_j": report.energy_j,
        "batches": report.batches,
        "passes": report.passes,
    }


@router.post("/matmul")
def simulate_matmul(request: MatMulRequest) -> Dict[str, Any]:
    """
    Multiply two matrices on the simulated MM-Engine.

    Args:
        request: Operands, run configuration and the oracle flag

    Returns:
        Product, cycle counts, pass count and cache statistics
    """
    cfg = request.config.with_preset()
    a = np.array(request.a, dtype=np.float64)
    b = np.array(request.b, dtype=np.float64)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")

    fmt = cfg.qformat
    engine_cfg = cfg.engine_config()
    lhs_cache, rhs_cache = cfg.cache_configs()
    engine = MMEngine(engine_cfg, CacheHierarchy(engine_cfg.s, lhs_cache, rhs_cache),
                      qformat=fmt, threads=cfg.threads, costing=cfg.costing)
    result = engine.run_matmul(Matrix.from_real(a, fmt, engine.counter), Matrix.from_real(b, fmt, engine.counter),
                               mode=CacheMode.COVARIANCE)
    product = result.product.to_real()
    logger.info(f"API matmul {a.shape}x{b.shape}: {result.plan.pass_count} passes, {result.cycles:.6g} cycles")

    payload = {
        "product": product.tolist(),
        "cycles": result.cycles,
        "load_cycles": result.load_cycles,
        "compute_cycles": result.compute_cycles,
        "passes": result.plan.pass_count,
        "tiles_per_block": result.plan.tiles_per_block,
        "cache_stats": result.cache_stats,
        "saturation_events": result.saturation_events,
    }
    if request.verify:
        payload["oracle_max_abs_error"] = float(np.max(np.abs(product - oracle_matmul(a, b))))
    return payload


@router.post("/pca")
def simulate_pca(request: PcaRequest) -> Dict[str, Any]:
    """
    Run standardize -> covariance -> Jacobi -> selection -> projection.

    Args:
        request: Data matrix, run configuration and the oracle flag

    Returns:
        Eigenvalues, EVCR/CVCR, k, convergence trace and the perf report
    """
    result = run_configured(np.array(request.data, dtype=np.float64), request.config, verify=request.verify)
    sel = result.selection
    return {
        "eigenvalues": [float(v) for v in result.jacobi.eigenvalues],
        "evcr": [float(v) for v in sel.evcr],
        "cvcr": [float(v) for v in sel.cvcr],
        "k": sel.k,
        "criterion": str(sel.criterion),
        "convergence": [row.dict() for row in result.jacobi.convergence],
        "projection": result.projected.to_real().tolist(),
        "perf": _perf_payload(result.perf),
        "oracle_projector_distance": result.oracle_projector_distance,
    }


@router.post("/estimate")
def simulate_estimate(request: EstimateRequest) -> Dict[str, Any]:
    """
    Analytical cycle, time and energy estimate without running the datapath.

    Returns:
        PerfReport fields
    """
    cfg = request.config.with_preset()
    report = estimate_cycles(request.workload(), cfg.engine_config(), cfg.perf_model())
    return _perf_payload(report)
