"""Jacobian unit: Data Lookup Engine, CORDIC angle stage, Givens controller, sweep loop."""
import logging
import math
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np

from config import settings
from models.cache_models import CacheConfig, CacheMode
from models.engine_models import CostingMode, EngineConfig
from models.jacobi_models import (
    ConvergenceRow,
    JacobiConfig,
    JacobiResult,
    PivotRecord,
    PivotStrategy,
    RotationAngles,
    RotationRecord,
    Scalar,
)
from services.cache_service import CacheHierarchy, effective_access_time
from services.engine_service import MMEngine, analytic_matmul_cycles
from utils.errors import NumericalFailure
from utils.matrix import Matrix, Tile, grid_dims, tile
from utils.numerics import (
    CordicConfig,
    Fixed,
    QFormat,
    SaturationCounter,
    cordic_atan,
    cordic_sincos,
    fixed_add,
    fixed_shift_right,
    fixed_sub,
    fx_add_array,
    fx_mul_array,
    fx_widen_array,
)

logger = logging.getLogger(__name__)

# Hit rate used to charge rotations that bypass the engine
SPARSE_ASSUMED_HIT_RATE = 0.9

# Called after every rotation with (pivot, C before, C after)
RotationObserver = Callable[[PivotRecord, Matrix, Matrix], None]


class DataLookupEngine:
    """Streaming argmax over drained covariance tiles.

    Diagonal elements are latched, never compared. Ties on magnitude keep the
    smaller canonical (p, q) pair; for the same pair the upper-triangle
    element wins, so the result does not depend on the order tiles arrive in.
    """

    def __init__(self, n: int, qformat: Optional[QFormat] = None):
        if n < 1:
            raise ValueError(f"matrix order must be >= 1, got {n}")
        self.n = n
        self.qformat = qformat
        self.best_magnitude: Scalar = -1
        self._best_key: Tuple[int, int, int] = (n, n, 1)
        self._best_value: Scalar = 0
        self.diag_latch: List[Optional[Scalar]] = [None] * n
        self.tiles_observed = 0
        self.scan_position: Tuple[int, int, int] = (0, 0, 0)

    def observe_tile(self, blk: Tile, origin: Tuple[int, int], accumulator_index: int = 0, current_row_block: int = 0) -> "DataLookupEngine":
        br, bc = origin
        r0, c0 = br * blk.t, bc * blk.t
        if br < 0 or bc < 0 or r0 >= self.n or c0 >= self.n:
            raise ValueError(f"tile origin {origin} outside a {self.n}x{self.n} matrix")
        vr = min(blk.valid_rows, self.n - r0)
        vc = min(blk.valid_cols, self.n - c0)
        values = blk.values[:vr, :vc]
        magnitudes = np.abs(values)
        if br == bc:
            for d in range(min(vr, vc)):
                self.diag_latch[r0 + d] = values[d, d]
                magnitudes[d, d] = -1
        self.tiles_observed += 1
        self.scan_position = (current_row_block, accumulator_index, self.tiles_observed)

        peak = magnitudes.max() if magnitudes.size else -1
        if peak < 0 or peak < self.best_magnitude:
            return self
        for li, lj in zip(*np.nonzero(magnitudes == peak)):
            i, j = r0 + int(li), c0 + int(lj)
            key = (min(i, j), max(i, j), 0 if i < j else 1)
            if peak > self.best_magnitude or key < self._best_key:
                self.best_magnitude = peak
                self._best_key = key
                self._best_value = values[li, lj]
        return self

    def tap(self, blk: Tile, origin: Tuple[int, int], accumulator_index: int, row_block: int) -> None:
        """Engine callback for drained output tiles."""
        self.observe_tile(blk, origin, accumulator_index, row_block)

    def scan_matrix(self, c: Matrix, t: Optional[int] = None) -> "DataLookupEngine":
        """Stream a whole matrix; t=None treats it as one n-sized tile."""
        if c.shape != (self.n, self.n):
            raise ValueError(f"expected a {self.n}x{self.n} matrix, got {c.shape}")
        if t is None:
            return self.observe_tile(Tile(self.n, c.data, (0, 0), self.n, self.n, c.qformat), (0, 0))
        tiled = tile(c, t)
        for br in range(tiled.grid_rows):
            for bc in range(tiled.grid_cols):
                self.observe_tile(tiled.tile_at(br, bc), (br, bc), bc, br)
        return self

    def pivot(self) -> PivotRecord:
        if self.best_magnitude < 0:
            raise ValueError("no off-diagonal element observed")
        p, q, _ = self._best_key
        c_pp, c_qq = self.diag_latch[p], self.diag_latch[q]
        if c_pp is None or c_qq is None:
            raise ValueError(f"diagonal entries for pivot ({p}, {q}) were not streamed")
        return PivotRecord(self._best_value, c_pp, c_qq, p, q)

    def widened(self, qformat: QFormat) -> "DataLookupEngine":
        """The same latched state re-expressed in a format with more fraction bits."""
        shift = qformat.fraction_bits - self.qformat.fraction_bits
        if qformat.integer_bits != self.qformat.integer_bits or shift < 0:
            raise ValueError(f"cannot widen a {self.qformat} lookup engine to {qformat}")
        scale = 1 << shift
        out = DataLookupEngine(self.n, qformat)
        out.best_magnitude = self.best_magnitude if self.best_magnitude < 0 else int(self.best_magnitude) * scale
        out._best_key = self._best_key
        out._best_value = int(self._best_value) * scale
        out.diag_latch = [None if d is None else int(d) * scale for d in self.diag_latch]
        out.tiles_observed = self.tiles_observed
        out.scan_position = self.scan_position
        return out


def compute_rotation(
    pivot: PivotRecord,
    cordic: Optional[CordicConfig] = None,
    counter: Optional[SaturationCounter] = None,
) -> RotationAngles:
    """theta = atan(2 c_pq / (c_pp - c_qq)) / 2 with sin and cos.

    Without a CORDIC config the real path uses double-precision math; with
    one, pivot values are raw codes in cordic.format and so are the results.
    """
    if pivot.c_pq == 0:
        if cordic is None:
            return RotationAngles(0.0, 0.0, 1.0, True)
        return RotationAngles(0, 0, Fixed.one(cordic.format).raw, True)

    if cordic is None:
        y, x = 2.0 * pivot.c_pq, pivot.c_pp - pivot.c_qq
        if x < 0 or (x == 0 and y < 0):
            x, y = -x, -y
        theta = 0.5 * math.atan2(y, x)
        return RotationAngles(theta, math.sin(theta), math.cos(theta))

    fmt = cordic.format
    c_pq = Fixed.from_raw(pivot.c_pq, fmt)
    y = fixed_add(c_pq, c_pq, counter)
    x = fixed_sub(Fixed.from_raw(pivot.c_pp, fmt), Fixed.from_raw(pivot.c_qq, fmt), counter)
    full = cordic_atan(y, x, cfg=cordic)
    theta = fixed_shift_right(full.angle, 1)
    sin_theta, cos_theta = cordic_sincos(theta, cordic)
    return RotationAngles(theta.raw, sin_theta.raw, cos_theta.raw, full.degenerate)


def build_givens(n: int, pivot: PivotRecord, sin_theta: Scalar, cos_theta: Scalar, qformat: Optional[QFormat] = None) -> Matrix:
    """Identity with R_pp = R_qq = cos, R_pq = sin, R_qp = -sin."""
    p, q = pivot.p, pivot.q
    if not 0 <= p < q < n:
        raise ValueError(f"Givens indices must satisfy 0 <= p < q < n, got p={p}, q={q}, n={n}")
    r = Matrix.identity(n, qformat)
    r.data[p, p] = cos_theta
    r.data[q, q] = cos_theta
    r.data[p, q] = sin_theta
    r.data[q, p] = -sin_theta
    return r


def off_diagonal_norm(c: Matrix) -> float:
    """Frobenius norm of the off-diagonal part, in double precision."""
    if c.rows != c.cols:
        raise ValueError(f"off-diagonal norm needs a square matrix, got {c.shape}")
    real = c.to_real()
    off = real[~np.eye(c.rows, dtype=bool)]
    return float(np.sqrt(np.sum(off * off)))


def _max_off_diagonal(c: Matrix) -> float:
    if c.rows < 2:
        return 0.0
    real = np.abs(c.to_real())
    np.fill_diagonal(real, 0.0)
    return float(real.max())


def _check_symmetric(c: Matrix, tolerance: float) -> None:
    real = c.to_real()
    if not np.all(np.isfinite(real)):
        raise NumericalFailure("covariance input contains NaN or inf")
    scale = max(1.0, float(np.max(np.abs(real)))) if real.size else 1.0
    if c.is_fixed:
        # one ULP of asymmetry per element is expected from truncation
        tolerance = max(tolerance, 4 * c.qformat.ulp / scale)
    gap = float(np.max(np.abs(real - real.T))) if real.size else 0.0
    if gap > tolerance * scale:
        raise ValueError(f"covariance input is not symmetric (max |c_ij - c_ji| = {gap:.3e})")


def _working_format(fmt: Optional[QFormat], guard_bits: int) -> Optional[QFormat]:
    if fmt is None:
        return None
    return QFormat(fmt.integer_bits, fmt.fraction_bits + min(guard_bits, 64 - fmt.total_bits))


def _cyclic_pairs(n: int) -> Iterator[Tuple[int, int]]:
    for p in range(n - 1):
        for q in range(p + 1, n):
            yield p, q


def _sparse_rotate(c: Matrix, v: Matrix, r: Matrix, p: int, q: int, counter: SaturationCounter) -> Tuple[Matrix, Matrix]:
    """Update only rows/columns p and q; same arithmetic as the engine's R^T C R and V R."""
    fmt = c.qformat

    def mul(a, b):
        return a * b if fmt is None else fx_mul_array(np.asarray(a), np.asarray(b), fmt, counter)

    def add(a, b):
        return a + b if fmt is None else fx_add_array(a, b, fmt, counter)

    rpp, rpq, rqp, rqq = r.data[p, p], r.data[p, q], r.data[q, p], r.data[q, q]
    cd = c.data
    m = cd.copy()
    # R^T row p is (R_pp at p, R_qp at q); row q is (R_pq at p, R_qq at q)
    m[p, :] = add(mul(rpp, cd[p, :]), mul(rqp, cd[q, :]))
    m[q, :] = add(mul(rpq, cd[p, :]), mul(rqq, cd[q, :]))

    def right_multiply(a: np.ndarray) -> np.ndarray:
        out = a.copy()
        out[:, p] = add(mul(a[:, p], rpp), mul(a[:, q], rqp))
        out[:, q] = add(mul(a[:, p], rpq), mul(a[:, q], rqq))
        return out

    return Matrix(right_multiply(m), fmt), Matrix(right_multiply(v.data), fmt)


def _default_engine(qformat: Optional[QFormat], counter: SaturationCounter) -> MMEngine:
    cfg = EngineConfig(t=settings.tile_size, s=settings.parallelism)
    lhs = CacheConfig(rows=settings.lhs_cache_rows, dram_penalty=settings.dram_penalty, cache_hit_time=settings.cache_hit_time)
    rhs = CacheConfig(rows=settings.rhs_cache_rows, dram_penalty=settings.dram_penalty, cache_hit_time=settings.cache_hit_time)
    hierarchy = CacheHierarchy(cfg.s, lhs, rhs)
    return MMEngine(cfg, hierarchy, qformat=qformat, threads=settings.sim_threads, counter=counter)


def _sparse_rotation_cycles(n: int, engine: Optional[MMEngine]) -> Tuple[float, float]:
    if engine is not None:
        cfg, cache_cfg, costing = engine.cfg, engine.hierarchy.lhs_shared.config, engine.costing
    else:
        cfg = EngineConfig(t=settings.tile_size, s=settings.parallelism)
        cache_cfg = CacheConfig(rows=settings.lhs_cache_rows, dram_penalty=settings.dram_penalty, cache_hit_time=settings.cache_hit_time)
        costing = CostingMode.SEQUENTIAL
    eat = effective_access_time(None, cache_cfg, hit_rate=SPARSE_ASSUMED_HIT_RATE)
    g = grid_dims(n, n, cfg.t)
    load, compute = analytic_matmul_cycles(g, g, cfg, eat, eat, costing)
    return 3 * load, 3 * compute


def jacobi_eigendecomposition(
    c0: Matrix,
    cfg: Optional[JacobiConfig] = None,
    engine: Optional[MMEngine] = None,
    hierarchy: Optional[CacheHierarchy] = None,
    initial_dle: Optional[DataLookupEngine] = None,
    cordic: Optional[CordicConfig] = None,
    observer: Optional[RotationObserver] = None,
) -> JacobiResult:
    """Classical Jacobi diagonalization of a symmetric matrix on the simulated datapath.

    One sweep is N(N-1)/2 rotation slots. Under max-pivot selection a zero
    pivot means the matrix is already diagonal and the rest of the sweep is
    skipped. The off-diagonal norm is recorded after every sweep and only
    ends the loop early when cfg.epsilon > 0.

    On the fixed path C and V live in a working format with cfg.guard_bits
    extra fraction bits (capped at 64 total bits) from entry to readout, and
    the CORDIC stage runs in that format with the depth of the input format.
    """
    cfg = cfg or JacobiConfig()
    n = c0.rows
    if c0.cols != n:
        raise ValueError(f"Jacobi needs a square matrix, got {c0.shape}")
    _check_symmetric(c0, cfg.symmetry_tolerance)
    fmt = c0.qformat
    work = _working_format(fmt, cfg.guard_bits)
    if fmt is not None and cordic is None:
        cordic = CordicConfig.for_format(fmt, cfg.cordic_iterations)
    if cordic is not None:
        if cordic.format != fmt:
            raise ValueError(f"CORDIC format {cordic.format} does not match matrix format {fmt}")
        cordic = CordicConfig(cordic.iterations, work, cordic.residual_correction)

    counter = engine.counter if engine is not None else SaturationCounter()
    if engine is None and not cfg.sparse_rotations:
        engine = _default_engine(fmt, counter)
    if hierarchy is not None and engine is not None and hierarchy is not engine.hierarchy:
        raise ValueError("hierarchy must be the engine's hierarchy")
    if engine is not None:
        if engine.qformat != fmt:
            raise ValueError(f"engine runs path {engine.qformat}, matrix is {fmt}")
        engine.hierarchy.set_mode(CacheMode.ROTATION)
        engine = engine.on_path(work)
        if work != fmt:
            logger.debug(f"rotation datapath widened from {fmt} to {work}")

    if fmt is None:
        c = Matrix(c0.data.copy())
    else:
        c = Matrix(fx_widen_array(c0.data, fmt, work), work)
    v = Matrix.identity(n, work)
    slots = n * (n - 1) // 2
    max_pivot = cfg.pivot_strategy == PivotStrategy.MAX_PIVOT
    sparse_load, sparse_compute = _sparse_rotation_cycles(n, engine) if cfg.sparse_rotations else (0.0, 0.0)

    dle: Optional[DataLookupEngine] = None
    if max_pivot and n > 1:
        if initial_dle is not None:
            dle = initial_dle if fmt is None else initial_dle.widened(work)
        elif cfg.sparse_rotations:
            dle = DataLookupEngine(n, work).scan_matrix(c)
        else:
            dle = DataLookupEngine(n, work).scan_matrix(c, engine.cfg.t)

    e0 = off_diagonal_norm(c)
    trace = [e0]
    rows = [ConvergenceRow(sweep=0, e_off=e0, e_off_relative=0.0 if e0 == 0 else 1.0,
                           max_pivot_magnitude=_max_off_diagonal(c), rotations_so_far=0)]
    rotations = 0
    sweeps = 0
    load = compute = 0.0
    givens_writes = 0
    records: List[RotationRecord] = []
    total_saturations = 0

    def out_of_rotations() -> bool:
        return cfg.rotation_budget is not None and rotations >= cfg.rotation_budget

    for sweep in range(1, cfg.sweep_budget + 1):
        if cfg.epsilon > 0 and trace[-1] < cfg.epsilon:
            break
        if out_of_rotations():
            break
        sat_before = counter.count
        pairs = _cyclic_pairs(n)
        for slot in range(slots):
            if out_of_rotations():
                logger.debug(f"sweep {sweep}: rotation budget {cfg.rotation_budget} spent at slot {slot}")
                break
            if max_pivot:
                pivot = dle.pivot()
                if pivot.c_pq == 0:
                    logger.debug(f"sweep {sweep}: zero pivot at slot {slot}, matrix is diagonal")
                    break
            else:
                p, q = next(pairs)
                pivot = PivotRecord(c.data[p, q], c.data[p, p], c.data[q, q], p, q)
                if pivot.c_pq == 0:
                    continue

            angles = compute_rotation(pivot, cordic, counter)
            # R from (-sin, cos): R^T C R zeroes c_pq
            neg_sin = -angles.sin_theta
            r = build_givens(n, pivot, neg_sin, angles.cos_theta, work)
            before = c

            if cfg.sparse_rotations:
                c, v = _sparse_rotate(c, v, r, pivot.p, pivot.q, counter)
                load += sparse_load
                compute += sparse_compute
                if max_pivot:
                    dle = DataLookupEngine(n, work).scan_matrix(c)
            else:
                # Givens controller: write R back to memory (only changed tiles land)
                _, written = engine.hierarchy.stage("R", tile(r, engine.cfg.t))
                givens_writes += written
                next_dle = DataLookupEngine(n, work) if max_pivot else None
                update = engine.run_rotation_update(c, v, r, tap=next_dle.tap if next_dle else None)
                c, v = update.c, update.v
                load += update.load_cycles
                compute += update.compute_cycles
                dle = next_dle
            rotations += 1

            if cfg.record_rotations:
                theta = angles.theta if work is None else angles.theta / work.scale
                c_pq = pivot.c_pq if work is None else pivot.c_pq / work.scale
                records.append(RotationRecord(rotations, pivot.p, pivot.q, float(theta), float(c_pq)))
            if fmt is None and not np.all(np.isfinite(c.data)):
                raise NumericalFailure(f"non-finite value in covariance after rotation {rotations} (sweep {sweep})")
            if observer is not None:
                observer(pivot, before, c)

        sweeps = sweep
        sweep_saturations = counter.count - sat_before
        total_saturations += sweep_saturations
        if sweep_saturations:
            logger.warning(f"sweep {sweep}: {sweep_saturations} saturation events")
        if sweep_saturations >= cfg.saturation_limit:
            raise NumericalFailure(
                f"saturation storm in sweep {sweep}: {sweep_saturations} events (limit {cfg.saturation_limit})"
            )
        e_off = off_diagonal_norm(c)
        trace.append(e_off)
        rows.append(ConvergenceRow(
            sweep=sweep,
            e_off=e_off,
            e_off_relative=0.0 if e0 == 0 else e_off / e0,
            max_pivot_magnitude=_max_off_diagonal(c),
            rotations_so_far=rotations,
        ))
        logger.debug(f"sweep {sweep}: E_off={e_off:.6e}, rotations={rotations}")

    eigenvalues = np.diag(c.to_real()).copy()
    vectors = v.to_real()
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]
    for col in range(n):
        nonzero = np.flatnonzero(vectors[:, col])
        if nonzero.size and vectors[nonzero[0], col] < 0:
            vectors[:, col] = -vectors[:, col]

    logger.info(
        f"Jacobi finished: n={n}, sweeps={sweeps}, rotations={rotations}, "
        f"E_off {e0:.3e} -> {trace[-1]:.3e}"
    )
    return JacobiResult(
        eigenvalues=eigenvalues,
        eigenvectors=Matrix(vectors),
        e_off_trace=trace,
        sweeps_executed=sweeps,
        rotations_executed=rotations,
        convergence=rows,
        cycles=load + compute,
        load_cycles=load,
        compute_cycles=compute,
        saturation_events=total_saturations,
        givens_tile_writes=givens_writes,
        rotations=records,
    )
