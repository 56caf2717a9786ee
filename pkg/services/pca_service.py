"""End-to-end PCA on the simulated accelerator."""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from models.cache_models import CacheConfig, CacheMode
from models.engine_models import CostingMode, EngineConfig
from models.jacobi_models import JacobiConfig, JacobiResult
from models.pca_models import (
    ComponentSelection,
    CriterionKind,
    PcaOutput,
    SelectionCriterion,
    StandardizationParams,
)
from models.perf_models import PerfModelConfig, PerfReport, PhaseCycles
from models.run_models import RunConfig
from services.cache_service import CacheHierarchy
from services.engine_service import MMEngine
from services.jacobi_service import DataLookupEngine, jacobi_eigendecomposition
from utils.matrix import Matrix, transpose_view
from utils.numerics import CordicConfig, QFormat, SaturationCounter
from utils.oracle import oracle_pca, projector_distance

logger = logging.getLogger(__name__)

# Relative slack when clamping slightly negative eigenvalues and comparing ratios
EIGENVALUE_TOLERANCE = 1e-9
RATIO_TOLERANCE = 1e-12


def standardize(x: Matrix) -> Tuple[Matrix, StandardizationParams]:
    """Column-wise (x - mu) / sigma with the sample standard deviation.

    Zero-variance columns come out as zeros and are listed in the params.
    """
    if x.rows < 2:
        raise ValueError(f"standardization needs at least 2 rows, got {x.rows}")
    data = x.to_real()
    mu = data.mean(axis=0)
    sigma = data.std(axis=0, ddof=1)
    zero_variance = [int(j) for j in np.flatnonzero(sigma == 0)]
    if zero_variance:
        logger.warning(f"Zero-variance features emitted as zero columns: {zero_variance}")
    safe = np.where(sigma == 0, 1.0, sigma)
    y = (data - mu) / safe
    y[:, sigma == 0] = 0.0
    return Matrix(y), StandardizationParams(mu=mu, sigma=sigma, zero_variance=zero_variance)


def select_components(eigenvalues, criterion: SelectionCriterion, tolerance: float = EIGENVALUE_TOLERANCE) -> ComponentSelection:
    """EVCR/CVCR of a descending spectrum and the number of components to keep."""
    lam = np.asarray(eigenvalues, dtype=np.float64).copy()
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("need a non-empty eigenvalue vector")
    scale = float(np.max(np.abs(lam)))
    floor = -tolerance * scale
    if np.any(lam < floor):
        raise ValueError(f"eigenvalue {lam.min():.6e} is negative beyond tolerance")
    lam[lam < 0] = 0.0
    total = float(lam.sum())
    if total <= 0:
        raise ValueError("sum of eigenvalues must be positive")
    evcr = lam / total
    cvcr = np.cumsum(lam) / total

    n = lam.size
    if criterion.kind == CriterionKind.FIXED_K:
        k = int(criterion.value)
        if k > n:
            raise ValueError(f"k={k} exceeds the {n} available components")
    elif criterion.kind == CriterionKind.CVCR_TARGET:
        k = int(np.argmax(cvcr >= criterion.value - RATIO_TOLERANCE)) + 1
        if cvcr[k - 1] < criterion.value - RATIO_TOLERANCE:
            k = n
    else:
        k = max(1, int(np.count_nonzero(evcr >= criterion.value - RATIO_TOLERANCE)))
    return ComponentSelection(evcr=evcr, cvcr=cvcr, k=k, criterion=criterion, eigenvalues=lam)


def _projection_operands(x: Matrix, v: Matrix, k: int) -> Matrix:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if v.rows != x.cols:
        raise ValueError(f"eigenvector matrix has {v.rows} rows, data has {x.cols} features")
    if k > v.cols:
        raise ValueError(f"k={k} exceeds the {v.cols} eigenvectors")
    vk = v.to_real()[:, :k]
    return Matrix.from_real(vk, x.qformat)


def project(x_centered: Matrix, v: Matrix, k: int, engine: Optional[MMEngine] = None) -> Matrix:
    """O = X V[:, :k] through the engine datapath."""
    vk = _projection_operands(x_centered, v, k)
    if engine is None:
        engine = build_engine(EngineConfig(), qformat=x_centered.qformat)
    return engine.run_matmul(x_centered, vk, mode=CacheMode.COVARIANCE, lhs_region="X", rhs_region="Vk", out_region="O").product


def build_engine(
    cfg: EngineConfig,
    qformat: Optional[QFormat] = None,
    cache_configs: Optional[Tuple[CacheConfig, CacheConfig]] = None,
    threads: int = 1,
    perf_model: Optional[PerfModelConfig] = None,
    counter: Optional[SaturationCounter] = None,
) -> MMEngine:
    if cache_configs is None:
        cache_configs = (CacheConfig(rows=256), CacheConfig(rows=64))
    lhs_cfg, rhs_cfg = cache_configs
    hierarchy = CacheHierarchy(cfg.s, lhs_cfg, rhs_cfg)
    costing = perf_model.costing if perf_model is not None else CostingMode.SEQUENTIAL
    return MMEngine(cfg, hierarchy, qformat=qformat, threads=threads, costing=costing, counter=counter)


def run_pca(
    x: Matrix,
    engine_cfg: Optional[EngineConfig] = None,
    jacobi_cfg: Optional[JacobiConfig] = None,
    criterion: Optional[SelectionCriterion] = None,
    qformat: Optional[QFormat] = None,
    cache_configs: Optional[Tuple[CacheConfig, CacheConfig]] = None,
    perf_model: Optional[PerfModelConfig] = None,
    standardize_input: bool = True,
    threads: int = 1,
    cordic: Optional[CordicConfig] = None,
    verify: bool = False,
) -> PcaOutput:
    """standardize -> covariance -> Jacobi -> selection -> projection.

    The covariance is the raw Gram matrix X^T X; selection ratios do not
    depend on its scale.
    """
    engine_cfg = engine_cfg or EngineConfig()
    jacobi_cfg = jacobi_cfg or JacobiConfig()
    criterion = criterion or SelectionCriterion()
    perf_model = perf_model or PerfModelConfig()

    if standardize_input:
        y, params = standardize(x)
    else:
        y, params = Matrix(x.to_real()), None
    counter = SaturationCounter()
    xq = Matrix.from_real(y.to_real(), qformat, counter)
    engine = build_engine(engine_cfg, qformat, cache_configs, threads, perf_model, counter)
    m, n = xq.shape

    logger.info(f"PCA covariance phase: X is {m}x{n}, T={engine_cfg.t}, S={engine_cfg.s}, path={qformat or 'float'}")
    dle = DataLookupEngine(n, qformat)
    cov = engine.run_matmul(transpose_view(xq), xq, mode=CacheMode.COVARIANCE,
                            lhs_region="Xt", rhs_region="X", out_region="C", tap=dle.tap)

    logger.info(f"PCA Jacobi phase: budget {jacobi_cfg.sweep_budget} sweeps, {jacobi_cfg.pivot_strategy.value} pivoting")
    jac = jacobi_eigendecomposition(cov.product, jacobi_cfg, engine, initial_dle=dle if n > 1 else None, cordic=cordic)

    selection = select_components(jac.eigenvalues, criterion)
    logger.info(f"Selected k={selection.k} of {n} components ({criterion}), CVCR={selection.cvcr[selection.k - 1]:.6f}")

    vk = _projection_operands(xq, jac.eigenvectors, selection.k)
    proj = engine.run_matmul(xq, vk, mode=CacheMode.COVARIANCE, lhs_region="X", rhs_region="Vk", out_region="O")
    logger.info(f"PCA projection phase done: {proj.product.shape}")

    report = PerfReport(
        phases={
            "covariance": PhaseCycles(load=cov.load_cycles, compute=cov.compute_cycles),
            "jacobi": PhaseCycles(load=jac.load_cycles, compute=jac.compute_cycles),
            "projection": PhaseCycles(load=proj.load_cycles, compute=proj.compute_cycles),
        },
        clock_hz=perf_model.clock_hz,
        peak_power_w=perf_model.peak_power_w,
        batches=math.ceil(m * n / (engine_cfg.s * engine_cfg.t ** 2)),
        passes=cov.plan.pass_count,
        costing=engine.costing,
        source="simulated",
    )

    distance = None
    if verify:
        _, oracle_vk, _ = oracle_pca(y.to_real(), selection.k)
        distance = projector_distance(jac.eigenvectors.to_real()[:, :selection.k], oracle_vk)
        logger.info(f"Oracle projector distance: {distance:.3e}")

    return PcaOutput(
        projected=proj.product,
        selection=selection,
        jacobi=jac,
        perf=report,
        standardization=params,
        oracle_projector_distance=distance,
        cache_stats=[row.dict() for row in engine.hierarchy.stats_rows()],
        pass_trace=cov.trace,
    )


def run_configured(x: np.ndarray, run_cfg: RunConfig, verify: bool = False) -> PcaOutput:
    """run_pca with every knob taken from a validated RunConfig."""
    run_cfg = run_cfg.with_preset()
    return run_pca(
        Matrix(np.asarray(x, dtype=np.float64)),
        engine_cfg=run_cfg.engine_config(),
        jacobi_cfg=run_cfg.jacobi_config(),
        criterion=run_cfg.criterion,
        qformat=run_cfg.qformat,
        cache_configs=run_cfg.cache_configs(),
        perf_model=run_cfg.perf_model(),
        standardize_input=run_cfg.standardize,
        threads=run_cfg.threads,
        cordic=run_cfg.cordic_config(),
        verify=verify,
    )


def convergence_study(x: np.ndarray, run_cfg: RunConfig, symmetric: bool = False) -> JacobiResult:
    """Jacobi with per-sweep instrumentation on the covariance of x.

    With symmetric=True, x is taken as the matrix to diagonalize.
    """
    run_cfg = run_cfg.with_preset()
    fmt = run_cfg.qformat
    counter = SaturationCounter()
    engine = build_engine(run_cfg.engine_config(), fmt, run_cfg.cache_configs(), run_cfg.threads, run_cfg.perf_model(), counter)
    if symmetric:
        c = Matrix.from_real(x, fmt, counter)
        return jacobi_eigendecomposition(c, run_cfg.jacobi_config(), engine, cordic=run_cfg.cordic_config())

    data = Matrix(np.asarray(x, dtype=np.float64))
    y = standardize(data)[0] if run_cfg.standardize else data
    xq = Matrix.from_real(y.to_real(), fmt, counter)
    dle = DataLookupEngine(xq.cols, fmt)
    cov = engine.run_matmul(transpose_view(xq), xq, mode=CacheMode.COVARIANCE,
                            lhs_region="Xt", rhs_region="X", out_region="C", tap=dle.tap)
    return jacobi_eigendecomposition(cov.product, run_cfg.jacobi_config(), engine,
                                     initial_dle=dle if xq.cols > 1 else None, cordic=run_cfg.cordic_config())
