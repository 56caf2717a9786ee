"""MM-Engine controller: block-streaming pass scheduling over S systolic arrays."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

from models.cache_models import CacheMode
from models.engine_models import (
    AccessCounts,
    CostingMode,
    EngineConfig,
    MatMulResult,
    PassPlan,
    PassSpec,
    PassTrace,
    RotationUpdateResult,
)
from services.cache_service import CacheHierarchy, Region
from services.systolic_service import Accumulator, SystolicArray
from utils.matrix import Matrix, Tile, TiledMatrix, mpu_skew_lhs, mpu_skew_rhs, tile, transpose_view
from utils.numerics import QFormat, SaturationCounter

logger = logging.getLogger(__name__)

# Observer for drained output tiles: (tile, (block_row, block_col), accumulator index, row block)
TileTap = Callable[[Tile, Tuple[int, int], int, int], None]


def plan_passes(lhs_grid: Tuple[int, int], rhs_grid: Tuple[int, int], cfg: EngineConfig) -> PassPlan:
    """Row-major pass schedule: each pass owns one row block and up to S column blocks."""
    rows, inner = lhs_grid
    inner_rhs, cols = rhs_grid
    if inner != inner_rhs:
        raise ValueError(f"inner tile-grid dimensions disagree: {lhs_grid} x {rhs_grid}")
    passes: List[PassSpec] = []
    for br in range(rows):
        for start in range(0, cols, cfg.s):
            passes.append(PassSpec(len(passes), br, tuple(range(start, min(start + cfg.s, cols))), inner))
    return PassPlan(passes, rows, cols, inner, cfg.s)


def analytic_matmul_cycles(
    lhs_grid: Tuple[int, int],
    rhs_grid: Tuple[int, int],
    cfg: EngineConfig,
    read_eat: float,
    write_eat: float,
    costing: CostingMode = CostingMode.SEQUENTIAL,
) -> Tuple[float, float]:
    """(load, compute) cycles of one tiled matmul with a fixed per-access cost."""
    rows, inner = lhs_grid
    _, cols = rhs_grid
    passes = rows * math.ceil(cols / cfg.s)
    if costing == CostingMode.PARALLEL:
        load = passes * (2 * inner * read_eat + write_eat)
        compute = passes * inner * cfg.tile_cycles
        return load, compute
    reads = passes * inner + rows * cols * inner
    writes = rows * cols
    return reads * read_eat + writes * write_eat, rows * cols * inner * cfg.tile_cycles


@dataclass
class _ArrayOutcome:
    block_col: int
    tile: Optional[Tile] = None
    load: float = 0.0
    compute: int = 0
    hits: int = 0
    misses: int = 0


class MMEngine:
    """S TxT systolic arrays sharing one LHS cache, each with a private RHS cache."""

    def __init__(
        self,
        cfg: EngineConfig,
        hierarchy: CacheHierarchy,
        qformat: Optional[QFormat] = None,
        threads: int = 1,
        costing: CostingMode = CostingMode.SEQUENTIAL,
        counter: Optional[SaturationCounter] = None,
        cycle_accurate: bool = False,
    ):
        if hierarchy.s != cfg.s:
            raise ValueError(f"hierarchy has {hierarchy.s} private caches, engine needs {cfg.s}")
        self.cfg = cfg
        self.hierarchy = hierarchy
        self.qformat = qformat
        self.threads = max(1, threads)
        self.costing = costing
        self.counter = counter if counter is not None else SaturationCounter()
        self.cycle_accurate = cycle_accurate
        self.arrays = [SystolicArray(cfg.t, qformat, self.counter) for _ in range(cfg.s)]
        self.accumulators = [Accumulator(cfg.t, qformat, self.counter) for _ in range(cfg.s)]
        self._rotation_parity = 0

    def on_path(self, qformat: Optional[QFormat]) -> "MMEngine":
        """An engine over the same caches and counter whose arrays run qformat."""
        if qformat == self.qformat:
            return self
        return MMEngine(self.cfg, self.hierarchy, qformat, self.threads, self.costing, self.counter, self.cycle_accurate)

    def _check_path(self, m: Matrix, name: str) -> None:
        if m.qformat != self.qformat:
            raise ValueError(f"{name} is on path {m.qformat}, engine runs {self.qformat}")

    def _run_array(self, s: int, spec: PassSpec, block_col: int, lhs_tiles: List[Tile], lhs_streams, rhs_region: Region) -> _ArrayOutcome:
        outcome = _ArrayOutcome(block_col)
        cache = self.hierarchy.cache(s)
        array, acc = self.arrays[s], self.accumulators[s]
        for kb in range(spec.tiles_per_block):
            hits_before = cache.stats.hits
            rhs_tile, latency = self.hierarchy.read_tile(s, rhs_region.address(kb, block_col))
            outcome.load += latency
            if cache.stats.hits > hits_before:
                outcome.hits += 1
            else:
                outcome.misses += 1
            # Each output continues from its running partial, k ascending across tiles
            if self.cycle_accurate:
                product, cycles = array.run_tile_product(lhs_streams[kb], mpu_skew_rhs(rhs_tile), seed=acc.seed())
            else:
                product, cycles = array.tile_product(lhs_tiles[kb], rhs_tile, seed=acc.seed())
            outcome.compute += cycles
            acc.carry(product)
        outcome.tile = acc.drain(spec.tiles_per_block)
        return outcome

    def run_matmul(
        self,
        lhs: Matrix,
        rhs: Matrix,
        mode: Optional[CacheMode] = None,
        lhs_region: str = "A",
        rhs_region: str = "B",
        out_region: str = "C",
        tap: Optional[TileTap] = None,
    ) -> MatMulResult:
        """Compute lhs @ rhs through the caches and systolic arrays."""
        if lhs.cols != rhs.rows:
            raise ValueError(f"dimension mismatch: {lhs.shape} x {rhs.shape}")
        self._check_path(lhs, "lhs")
        self._check_path(rhs, "rhs")
        if mode is not None:
            self.hierarchy.set_mode(mode)

        t = self.cfg.t
        lhs_tiled, rhs_tiled = tile(lhs, t), tile(rhs, t)
        plan = plan_passes(lhs_tiled.grid, rhs_tiled.grid, self.cfg)
        h = self.hierarchy
        a_region, _ = h.stage(lhs_region, lhs_tiled)
        b_region, _ = h.stage(rhs_region, rhs_tiled)
        c_region = h.allocate_output(out_region, plan.row_blocks, plan.column_blocks)
        sat_before = self.counter.count
        logger.debug(
            f"matmul {lhs.shape}x{rhs.shape}: {plan.pass_count} passes, "
            f"{plan.tiles_per_block} tiles per block, mode {h.mode.value}"
        )

        out_tiles = [[None] * plan.column_blocks for _ in range(plan.row_blocks)]
        counts = AccessCounts()
        trace: List[PassTrace] = []
        total_load = total_compute = 0.0
        executor = ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None
        try:
            for spec in plan.passes:
                lhs_stats = h.lhs_shared.stats
                lhs_hits0, lhs_misses0 = lhs_stats.hits, lhs_stats.misses
                lhs_tiles, lhs_load = [], 0.0
                for kb in range(spec.tiles_per_block):
                    blk, latency = h.read_tile("lhs", a_region.address(spec.row_block, kb))
                    lhs_tiles.append(blk)
                    lhs_load += latency
                # Skewed once per pass, broadcast to every array
                lhs_streams = [mpu_skew_lhs(b) for b in lhs_tiles] if self.cycle_accurate else None

                jobs = list(enumerate(spec.column_blocks))
                if executor is not None and len(jobs) > 1:
                    futures = [
                        executor.submit(self._run_array, s, spec, bc, lhs_tiles, lhs_streams, b_region)
                        for s, bc in jobs
                    ]
                    outcomes = [f.result() for f in futures]
                else:
                    outcomes = [self._run_array(s, spec, bc, lhs_tiles, lhs_streams, b_region) for s, bc in jobs]

                # Barrier passed: drained tiles go out in array order
                array_costs = []
                for s, outcome in enumerate(outcomes):
                    bc = outcome.block_col
                    out = outcome.tile
                    out.origin = (spec.row_block, bc)
                    out.valid_rows = min(t, lhs.rows - spec.row_block * t)
                    out.valid_cols = min(t, rhs.cols - bc * t)
                    private = h.cache(s).stats
                    write_hits0 = private.write_hits
                    write_latency = h.write_tile(s, c_region.address(spec.row_block, bc), out)
                    counts.writes += 1
                    counts.write_hits += private.write_hits - write_hits0
                    out_tiles[spec.row_block][bc] = out
                    if tap is not None:
                        tap(out, (spec.row_block, bc), s, spec.row_block)
                    array_costs.append((outcome.load + write_latency, outcome.compute))

                if self.costing == CostingMode.PARALLEL:
                    slowest = max(array_costs, key=lambda lc: lc[0] + lc[1])
                    pass_load, pass_compute = lhs_load + slowest[0], float(slowest[1])
                else:
                    pass_load = lhs_load + sum(lc[0] for lc in array_costs)
                    pass_compute = float(sum(lc[1] for lc in array_costs))
                total_load += pass_load
                total_compute += pass_compute

                lhs_hits = lhs_stats.hits - lhs_hits0
                lhs_misses = lhs_stats.misses - lhs_misses0
                rhs_hits = sum(o.hits for o in outcomes)
                rhs_misses = sum(o.misses for o in outcomes)
                counts.reads += lhs_hits + lhs_misses + rhs_hits + rhs_misses
                counts.read_hits += lhs_hits + rhs_hits
                counts.tile_products += spec.tiles_per_block * len(outcomes)
                trace.append(PassTrace(
                    spec.pass_id, spec.row_block, spec.column_blocks,
                    pass_load + pass_compute, pass_load, pass_compute,
                    lhs_hits, lhs_misses, rhs_hits, rhs_misses,
                ))
        finally:
            if executor is not None:
                executor.shutdown(wait=True)

        product = TiledMatrix(lhs.rows, rhs.cols, t, out_tiles, self.qformat).reassemble()
        return MatMulResult(
            product=product,
            cycles=total_load + total_compute,
            load_cycles=total_load,
            compute_cycles=total_compute,
            plan=plan,
            counts=counts,
            cache_stats=[row.dict() for row in h.stats_rows()],
            trace=trace,
            saturation_events=self.counter.count - sat_before,
        )

    def run_rotation_update(self, c: Matrix, v: Matrix, givens: Matrix, tap: Optional[TileTap] = None) -> RotationUpdateResult:
        """C' = R^T C R and V' = V R as three engine matmuls in Rotation mode."""
        if self.hierarchy.mode != CacheMode.ROTATION:
            raise ValueError("rotation update requires the Rotation mode signal")
        n = c.rows
        for name, m in (("c", c), ("v", v), ("givens", givens)):
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}, got {m.shape}")

        cur, nxt = self._rotation_parity, 1 - self._rotation_parity
        rt = transpose_view(givens)
        step_m = self.run_matmul(rt, c, lhs_region="Rt", rhs_region=f"C{cur}", out_region="M")
        step_c = self.run_matmul(step_m.product, givens, lhs_region="M", rhs_region="R", out_region=f"C{nxt}", tap=tap)
        step_v = self.run_matmul(v, givens, lhs_region=f"V{cur}", rhs_region="R", out_region=f"V{nxt}")
        self._rotation_parity = nxt

        counts = AccessCounts()
        for step in (step_m, step_c, step_v):
            counts.merge(step.counts)
        steps = (step_m, step_c, step_v)
        return RotationUpdateResult(
            c=step_c.product,
            v=step_v.product,
            cycles=sum(s.cycles for s in steps),
            load_cycles=sum(s.load_cycles for s in steps),
            compute_cycles=sum(s.compute_cycles for s in steps),
            counts=counts,
            saturation_events=sum(s.saturation_events for s in steps),
            steps=list(steps),
        )


def run_matmul(
    lhs: Matrix,
    rhs: Matrix,
    cfg: EngineConfig,
    hierarchy: CacheHierarchy,
    mode: CacheMode = CacheMode.COVARIANCE,
    **kwargs,
) -> MatMulResult:
    """One-shot matmul on a fresh engine bound to hierarchy."""
    engine = MMEngine(cfg, hierarchy, qformat=lhs.qformat, **kwargs)
    return engine.run_matmul(lhs, rhs, mode=mode)
