"""Analytical cycle model, energy bookkeeping and design-space sweeps."""
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import settings
from models.cache_models import CacheConfig, CacheMode
from models.engine_models import EngineConfig, MatMulResult
from models.perf_models import BottleneckRow, DseRow, PerfModelConfig, PerfReport, PhaseCycles, WorkloadDims
from services.cache_service import CacheHierarchy, effective_access_time
from services.engine_service import MMEngine, analytic_matmul_cycles
from utils.datasets import planted_spike
from utils.matrix import Matrix, grid_dims, transpose_view

logger = logging.getLogger(__name__)

# Largest feature count the DSE sweep simulates; beyond it points are estimated
SIMULATION_FEATURE_LIMIT = 128

CONSTANT_ROWS_RECORDS = 1000
CONSTANT_ROWS_FEATURES = (16, 32, 64, 128, 256, 512, 1024)
CONSTANT_FEATURES_FEATURES = 16
CONSTANT_FEATURES_RECORDS = (1_000, 10_000, 100_000, 1_000_000)


def _eat(hit_rate: float, model: PerfModelConfig) -> float:
    cache = CacheConfig(rows=1, dram_penalty=model.dram_penalty, cache_hit_time=model.cache_hit_time)
    return effective_access_time(None, cache, hit_rate=hit_rate)


def measured_rates(result: MatMulResult) -> Tuple[float, float]:
    """(read hit rate, write hit rate) observed during one simulated matmul."""
    counts = result.counts
    if counts.reads == 0:
        raise ValueError("no reads recorded")
    read_p = counts.read_hits / counts.reads
    write_p = counts.write_hits / counts.writes if counts.writes else 0.0
    return read_p, write_p


def estimate_matmul_cycles(
    lhs_shape: Tuple[int, int],
    rhs_shape: Tuple[int, int],
    cfg: EngineConfig,
    model: PerfModelConfig,
    read_p: Optional[float] = None,
    write_p: Optional[float] = None,
) -> PhaseCycles:
    """Load and compute cycles of one tiled matmul.

    Every tile access costs the EAT at the assumed hit rate unless measured
    read/write hit rates are passed in.
    """
    if lhs_shape[1] != rhs_shape[0]:
        raise ValueError(f"dimension mismatch: {lhs_shape} x {rhs_shape}")
    read_eat = _eat(model.hit_rate_assumed if read_p is None else read_p, model)
    write_eat = _eat(model.hit_rate_assumed if write_p is None else write_p, model)
    load, compute = analytic_matmul_cycles(
        grid_dims(*lhs_shape, cfg.t), grid_dims(*rhs_shape, cfg.t), cfg, read_eat, write_eat, model.costing
    )
    return PhaseCycles(load=load, compute=compute)


def batch_count(records: int, features: int, cfg: EngineConfig) -> int:
    """Input-tile batches M*N/(S*T^2), rounded up."""
    return math.ceil(records * features / (cfg.s * cfg.t ** 2))


def covariance_pass_count(features: int, cfg: EngineConfig) -> int:
    """Output-block passes of the X^T X schedule."""
    blocks = math.ceil(features / cfg.t)
    return blocks * math.ceil(blocks / cfg.s)


def _jacobi_cycles(features: int, sweeps: int, cfg: EngineConfig, model: PerfModelConfig) -> PhaseCycles:
    rotations = sweeps * features * (features - 1) // 2
    step = estimate_matmul_cycles((features, features), (features, features), cfg, model)
    return PhaseCycles(load=3 * rotations * step.load, compute=3 * rotations * step.compute)


def estimate_cycles(dims: WorkloadDims, cfg: EngineConfig, model: PerfModelConfig) -> PerfReport:
    """Analytical PerfReport of a full PCA run (covariance, Jacobi, projection)."""
    m, n = dims.records, dims.features
    report = PerfReport(
        phases={
            "covariance": estimate_matmul_cycles((n, m), (m, n), cfg, model),
            "jacobi": _jacobi_cycles(n, dims.sweeps, cfg, model),
            "projection": estimate_matmul_cycles((m, n), (n, dims.components), cfg, model),
        },
        clock_hz=model.clock_hz,
        peak_power_w=model.peak_power_w,
        batches=batch_count(m, n, cfg),
        passes=covariance_pass_count(n, cfg),
        costing=model.costing,
        source="estimated",
    )
    logger.debug(f"Estimated {m}x{n} at T={cfg.t}, S={cfg.s}: {report.total_cycles:.6g} cycles")
    return report


def energy(report: PerfReport, model: Optional[PerfModelConfig] = None) -> float:
    """Joules = peak power x wall time; power is never modeled, only supplied."""
    power = report.peak_power_w
    if power is None and model is not None:
        power = model.peak_power_w
    if power is None:
        raise ValueError("power must be supplied externally")
    return power * report.wall_time_s


def _dse_row(t: int, s: int, phase: str, mode: str, cycles: PhaseCycles, model: PerfModelConfig) -> DseRow:
    wall = cycles.total / model.clock_hz
    return DseRow(
        t=t,
        s=s,
        phase=phase,
        mode=mode,
        cycles_load=cycles.load,
        cycles_compute=cycles.compute,
        cycles_total=cycles.total,
        wall_time_s=wall,
        energy_j=None if model.peak_power_w is None else model.peak_power_w * wall,
    )


def _simulate_matmul(lhs: Matrix, rhs: Matrix, cfg: EngineConfig, model: PerfModelConfig, threads: int) -> MatMulResult:
    lhs_cache = CacheConfig(rows=settings.lhs_cache_rows, dram_penalty=model.dram_penalty, cache_hit_time=model.cache_hit_time)
    rhs_cache = CacheConfig(rows=settings.rhs_cache_rows, dram_penalty=model.dram_penalty, cache_hit_time=model.cache_hit_time)
    engine = MMEngine(cfg, CacheHierarchy(cfg.s, lhs_cache, rhs_cache), qformat=lhs.qformat, threads=threads, costing=model.costing)
    return engine.run_matmul(lhs, rhs, mode=CacheMode.COVARIANCE)


def _simulated_point(x: Matrix, k: int, sweeps: int, cfg: EngineConfig, model: PerfModelConfig, threads: int) -> List[DseRow]:
    m, n = x.shape
    rows = []
    total = PhaseCycles()
    vk = Matrix(np.eye(n)[:, :k])
    for phase, lhs, rhs in (("covariance", transpose_view(x), x), ("projection", x, vk)):
        result = _simulate_matmul(lhs, rhs, cfg, model, threads)
        measured = PhaseCycles(load=result.load_cycles, compute=result.compute_cycles)
        rows.append(_dse_row(cfg.t, cfg.s, phase, "simulated", measured, model))
        rows.append(_dse_row(cfg.t, cfg.s, phase, "estimated", estimate_matmul_cycles(lhs.shape, rhs.shape, cfg, model), model))
        total.add(measured.load, measured.compute)
    jacobi = _jacobi_cycles(n, sweeps, cfg, model)
    rows.append(_dse_row(cfg.t, cfg.s, "jacobi", "estimated", jacobi, model))
    total.add(jacobi.load, jacobi.compute)
    rows.append(_dse_row(cfg.t, cfg.s, "total", "simulated", total, model))
    return rows


def _estimated_point(dims: WorkloadDims, cfg: EngineConfig, model: PerfModelConfig) -> List[DseRow]:
    report = estimate_cycles(dims, cfg, model)
    rows = [_dse_row(cfg.t, cfg.s, phase, "estimated", cycles, model) for phase, cycles in report.phases.items()]
    rows.append(_dse_row(cfg.t, cfg.s, "total", "estimated", PhaseCycles(load=report.load_cycles, compute=report.compute_cycles), model))
    return rows


def _nonincreasing(points: Dict[Tuple[int, int], float], outer: Iterable[int], inner: Sequence[int], key) -> bool:
    for o in outer:
        series = [points[key(o, i)] for i in inner if key(o, i) in points]
        if any(b > a for a, b in zip(series, series[1:])):
            return False
    return True


def scaling_verdicts(rows: Sequence[DseRow], records: int, features: int) -> Dict[str, bool]:
    """Check total cycles are nonincreasing in S and in T.

    Only tile sizes dividing both dimensions take part, padding makes the
    others incomparable.
    """
    totals = {(r.t, r.s): r.cycles_total for r in rows if r.phase == "total"}
    t_values = sorted({t for t, _ in totals if records % t == 0 and features % t == 0})
    s_values = sorted({s for _, s in totals})
    return {
        "nonincreasing_in_s": _nonincreasing(totals, t_values, s_values, lambda t, s: (t, s)),
        "nonincreasing_in_t": _nonincreasing(totals, s_values, t_values, lambda s, t: (t, s)),
    }


def dse_sweep(
    records: int,
    features: int,
    t_values: Sequence[int],
    s_values: Sequence[int],
    model: Optional[PerfModelConfig] = None,
    data: Optional[np.ndarray] = None,
    k: Optional[int] = None,
    sweeps: int = 15,
    seed: int = 0,
    threads: int = 1,
) -> Tuple[List[DseRow], Dict[str, bool]]:
    """Cross product of T and S values.

    Covariance and projection are simulated when features <= 128 (on data,
    or planted-spike data of the given shape); everything else is estimated.
    """
    if not t_values or not s_values:
        raise ValueError("DSE needs non-empty T and S grids")
    model = model or PerfModelConfig()
    dims = WorkloadDims(records=records, features=features, k=k, sweeps=sweeps)
    simulate = features <= SIMULATION_FEATURE_LIMIT
    x = None
    if simulate:
        values = data if data is not None else planted_spike(records, features, factors=min(2, features), seed=seed)
        if values.shape != (records, features):
            raise ValueError(f"data is {values.shape}, expected {(records, features)}")
        x = Matrix(np.asarray(values, dtype=np.float64))

    rows: List[DseRow] = []
    for t in t_values:
        for s in s_values:
            cfg = EngineConfig(t=t, s=s)
            logger.info(f"DSE point T={t}, S={s} ({'simulated' if simulate else 'estimated'})")
            if simulate:
                rows.extend(_simulated_point(x, dims.components, sweeps, cfg, model, threads))
            else:
                rows.extend(_estimated_point(dims, cfg, model))
    verdicts = scaling_verdicts(rows, records, features)
    logger.info(f"DSE verdicts: {verdicts}")
    return rows, verdicts


def _bottleneck_row(regime: str, records: int, features: int, cfg: EngineConfig, model: PerfModelConfig, sweeps: int) -> BottleneckRow:
    report = estimate_cycles(WorkloadDims(records=records, features=features, sweeps=sweeps), cfg, model)
    matmul = report.phases["covariance"].total + report.phases["projection"].total
    eigen = report.phases["jacobi"].total
    total = matmul + eigen
    return BottleneckRow(
        regime=regime,
        records=records,
        features=features,
        matmul_cycles=matmul,
        eigen_cycles=eigen,
        matmul_share=matmul / total,
        eigen_share=eigen / total,
    )


def bottleneck_sweep(
    cfg: Optional[EngineConfig] = None,
    model: Optional[PerfModelConfig] = None,
    sweeps: int = 15,
    feature_values: Sequence[int] = CONSTANT_ROWS_FEATURES,
    record_values: Sequence[int] = CONSTANT_FEATURES_RECORDS,
) -> List[BottleneckRow]:
    """Matmul vs eigendecomposition shares of the estimated run time.

    constant-rows fixes 1000 records and varies features; constant-features
    fixes 16 features and varies records.
    """
    cfg = cfg or EngineConfig()
    model = model or PerfModelConfig()
    rows = [_bottleneck_row("constant-rows", CONSTANT_ROWS_RECORDS, n, cfg, model, sweeps) for n in feature_values]
    rows += [_bottleneck_row("constant-features", m, CONSTANT_FEATURES_FEATURES, cfg, model, sweeps) for m in record_values]
    return rows
