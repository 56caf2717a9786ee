"""Tile-addressed backing store and the shared/private direct-mapped caches."""
import logging
import threading
from dataclasses import dataclass, asdict
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from models.cache_models import CacheConfig, CacheMode, CacheStatsRow, WriteMissPolicy
from utils.matrix import Tile, TiledMatrix

logger = logging.getLogger(__name__)

Side = Union[str, int]  # "lhs" or the index of a private RHS cache


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    write_hits: int = 0
    write_misses: int = 0
    writebacks: int = 0
    allocations: int = 0

    @property
    def reads(self) -> int:
        return self.hits + self.misses

    @property
    def writes(self) -> int:
        return self.write_hits + self.write_misses

    @property
    def hit_rate(self) -> Optional[float]:
        return self.hits / self.reads if self.reads else None

    def copy(self) -> "CacheStats":
        return CacheStats(**asdict(self))

    def __sub__(self, other: "CacheStats") -> "CacheStats":
        return CacheStats(**{k: v - getattr(other, k) for k, v in asdict(self).items()})


def effective_access_time(stats: Optional[CacheStats], config: CacheConfig, hit_rate: Optional[float] = None) -> float:
    """EAT = p*t_hit + (1-p)*penalty*t_hit.

    p is the measured read hit rate of stats unless hit_rate is given.
    """
    if hit_rate is None:
        if stats is None or stats.reads == 0:
            raise ValueError("effective access time is undefined with zero accesses")
        hit_rate = stats.hits / stats.reads
    if not 0.0 <= hit_rate <= 1.0:
        raise ValueError(f"hit rate must be in [0, 1], got {hit_rate}")
    t_hit = config.cache_hit_time
    return hit_rate * t_hit + (1.0 - hit_rate) * config.dram_penalty * t_hit


@dataclass
class Region:
    name: str
    base: int
    grid_rows: int
    grid_cols: int

    @property
    def size(self) -> int:
        return self.grid_rows * self.grid_cols

    def address(self, block_row: int, block_col: int) -> int:
        if not (0 <= block_row < self.grid_rows and 0 <= block_col < self.grid_cols):
            raise ValueError(
                f"tile ({block_row}, {block_col}) outside region {self.name!r} of {self.grid_rows}x{self.grid_cols}"
            )
        return self.base + block_row * self.grid_cols + block_col


class BackingStore:
    """Simulated DRAM: one flat tile-address space carved into named regions."""

    def __init__(self):
        self.regions: Dict[str, Region] = {}
        self._tiles: Dict[int, Tile] = {}
        self._next_base = 0
        self.lock = threading.Lock()

    @property
    def size(self) -> int:
        return self._next_base

    def region(self, name: str) -> Region:
        try:
            return self.regions[name]
        except KeyError:
            raise ValueError(f"unknown backing-store region {name!r}")

    def define(self, name: str, grid_rows: int, grid_cols: int) -> Tuple[Region, Optional[Region]]:
        """Create (or resize) a region; returns (region, retired_region_or_None)."""
        existing = self.regions.get(name)
        if existing is not None and (existing.grid_rows, existing.grid_cols) == (grid_rows, grid_cols):
            return existing, None
        region = Region(name, self._next_base, grid_rows, grid_cols)
        self._next_base += region.size
        self.regions[name] = region
        if existing is not None:
            for addr in range(existing.base, existing.base + existing.size):
                self._tiles.pop(addr, None)
        return region, existing

    def check(self, addr: int) -> None:
        if not 0 <= addr < self._next_base:
            raise ValueError(f"tile address {addr} outside backing store [0, {self._next_base})")

    def read(self, addr: int) -> Tile:
        self.check(addr)
        blk = self._tiles.get(addr)
        if blk is None:
            raise ValueError(f"tile address {addr} was never written")
        return blk

    def write(self, addr: int, blk: Tile) -> None:
        self.check(addr)
        self._tiles[addr] = blk

    def peek(self, addr: int) -> Optional[Tile]:
        return self._tiles.get(addr)


@dataclass
class CacheLine:
    valid: bool = False
    tag: int = -1
    payload: Optional[Tile] = None


class TileCache:
    """Direct-mapped cache with one complete tile per line; write-through."""

    def __init__(self, cache_id: str, config: CacheConfig, backing: BackingStore, policy: WriteMissPolicy = WriteMissPolicy.WRITE_AROUND):
        self.cache_id = cache_id
        self.config = config
        self.backing = backing
        self.policy = policy
        self.lines = [CacheLine() for _ in range(config.rows)]
        self.stats = CacheStats()

    def line_index(self, addr: int) -> int:
        return addr % self.config.rows

    def lookup(self, addr: int) -> Optional[Tile]:
        line = self.lines[self.line_index(addr)]
        if line.valid and line.tag == addr:
            return line.payload
        return None

    def read(self, addr: int) -> Tuple[Tile, float]:
        self.backing.check(addr)
        line = self.lines[self.line_index(addr)]
        if line.valid and line.tag == addr:
            self.stats.hits += 1
            return line.payload, self.config.cache_hit_time
        self.stats.misses += 1
        # Burst fetch of the whole tile; read misses always allocate
        payload = self.backing.read(addr)
        line.valid, line.tag, line.payload = True, addr, payload
        self.stats.allocations += 1
        return payload, self.config.miss_latency

    def write(self, addr: int, blk: Tile) -> float:
        self.backing.check(addr)
        line = self.lines[self.line_index(addr)]
        self.backing.write(addr, blk)
        self.stats.writebacks += 1
        if line.valid and line.tag == addr:
            self.stats.write_hits += 1
            line.payload = blk
            return self.config.cache_hit_time
        self.stats.write_misses += 1
        if self.policy == WriteMissPolicy.WRITE_ALLOCATE_NO_FETCH:
            line.valid, line.tag, line.payload = True, addr, blk
            self.stats.allocations += 1
        return self.config.miss_latency

    def invalidate(self, addr: int) -> bool:
        line = self.lines[self.line_index(addr)]
        if line.valid and line.tag == addr:
            line.valid, line.payload = False, None
            return True
        return False

    def coherent(self) -> bool:
        for line in self.lines:
            if line.valid:
                stored = self.backing.peek(line.tag)
                if stored is None or not np.array_equal(stored.values, line.payload.values):
                    return False
        return True


class CacheHierarchy:
    """One shared LHS cache and S private RHS caches over a common backing store."""

    def __init__(self, s: int, lhs_config: CacheConfig, rhs_config: CacheConfig, mode: CacheMode = CacheMode.COVARIANCE):
        if s < 1:
            raise ValueError(f"need at least one private cache, got {s}")
        self.backing = BackingStore()
        self.mode = mode
        policy = mode.write_miss_policy
        self.lhs_shared = TileCache("lhs", lhs_config, self.backing, policy)
        self.rhs_private = [TileCache(f"rhs{i}", rhs_config, self.backing, policy) for i in range(s)]
        self._lhs_lock = threading.Lock()
        self._switch_lock = threading.Lock()

    @property
    def s(self) -> int:
        return len(self.rhs_private)

    @property
    def caches(self) -> List[TileCache]:
        return [self.lhs_shared] + self.rhs_private

    @property
    def policy(self) -> WriteMissPolicy:
        return self.mode.write_miss_policy

    def cache(self, side: Side) -> TileCache:
        if side == "lhs":
            return self.lhs_shared
        if isinstance(side, int) and 0 <= side < self.s:
            return self.rhs_private[side]
        raise ValueError(f"unknown cache side {side!r}")

    def set_mode(self, mode: CacheMode) -> None:
        """Switch every cache's write-miss policy; contents are kept."""
        with self._switch_lock:
            if mode == self.mode:
                return
            logger.info(f"Cache mode {self.mode.value} -> {mode.value}")
            self.mode = mode
            for c in self.caches:
                c.policy = mode.write_miss_policy

    def read_tile(self, side: Side, addr: int) -> Tuple[Tile, float]:
        cache = self.cache(side)
        if cache is self.lhs_shared:
            with self._lhs_lock:
                return cache.read(addr)
        return cache.read(addr)

    def write_tile(self, side: Side, addr: int, blk: Tile) -> float:
        """Write through the named cache and invalidate stale copies elsewhere."""
        cache = self.cache(side)
        latency = cache.write(addr, blk)
        for other in self.caches:
            if other is not cache:
                other.invalidate(addr)
        return latency

    def define_region(self, name: str, grid_rows: int, grid_cols: int) -> Region:
        region, retired = self.backing.define(name, grid_rows, grid_cols)
        if retired is not None:
            for addr in range(retired.base, retired.base + retired.size):
                self._invalidate_everywhere(addr)
        return region

    def stage(self, name: str, tiled: TiledMatrix) -> Tuple[Region, int]:
        """Host-side write of a whole operand into backing memory.

        Only tiles whose contents changed are written; their cached copies are
        invalidated. Returns the region and the number of tiles written.
        """
        region = self.define_region(name, tiled.grid_rows, tiled.grid_cols)
        written = 0
        for br in range(tiled.grid_rows):
            for bc in range(tiled.grid_cols):
                addr = region.address(br, bc)
                blk = tiled.tile_at(br, bc)
                current = self.backing.peek(addr)
                if current is not None and current.qformat == blk.qformat and np.array_equal(current.values, blk.values):
                    continue
                self.backing.write(addr, blk)
                self._invalidate_everywhere(addr)
                written += 1
        return region, written

    def allocate_output(self, name: str, grid_rows: int, grid_cols: int) -> Region:
        return self.define_region(name, grid_rows, grid_cols)

    def _invalidate_everywhere(self, addr: int) -> None:
        for c in self.caches:
            c.invalidate(addr)

    def check_coherence(self) -> bool:
        return all(c.coherent() for c in self.caches)

    def snapshot(self) -> List[CacheStats]:
        return [c.stats.copy() for c in self.caches]

    def stats_rows(self) -> List[CacheStatsRow]:
        rows = []
        for c in self.caches:
            st = c.stats
            p = st.hit_rate
            eat = effective_access_time(st, c.config) if st.reads else None
            rows.append(CacheStatsRow(
                cache_id=c.cache_id,
                mode=self.mode.value,
                hits=st.hits,
                misses=st.misses,
                allocations=st.allocations,
                writebacks=st.writebacks,
                measured_p=p,
                eat=eat,
            ))
        return rows
