import numpy as np
import pytest

from models.cache_models import CacheConfig, CacheMode, WriteMissPolicy
from services.cache_service import BackingStore, CacheHierarchy, CacheStats, TileCache, effective_access_time
from utils.matrix import Matrix, Tile, tile


def _tile(value, t=2):
    return Tile(t, np.full((t, t), float(value)))


@pytest.fixture
def store():
    backing = BackingStore()
    backing.define("a", 4, 4)
    return backing


class TestBackingStore:
    def test_region_addresses_are_contiguous(self, store):
        region, _ = store.define("b", 2, 3)
        assert region.base == 16
        assert region.address(1, 2) == 21
        assert store.size == 22

    def test_region_bounds(self, store):
        with pytest.raises(ValueError, match="outside region"):
            store.region("a").address(4, 0)
        with pytest.raises(ValueError):
            store.region("missing")

    def test_read_of_unwritten_tile(self, store):
        with pytest.raises(ValueError, match="never written"):
            store.read(3)
        with pytest.raises(ValueError, match="outside backing store"):
            store.read(99)

    def test_resize_retires_old_tiles(self, store):
        store.write(0, _tile(1))
        region, retired = store.define("a", 2, 2)
        assert retired is not None
        assert region.base == 16
        assert store.peek(0) is None


class TestTileCache:
    def test_read_miss_then_hit(self, store):
        store.write(5, _tile(3))
        cache = TileCache("c", CacheConfig(rows=4, dram_penalty=10.0), store)
        _, first = cache.read(5)
        blk, second = cache.read(5)
        assert (first, second) == (10.0, 1.0)
        assert blk.values[0, 0] == 3.0
        assert (cache.stats.hits, cache.stats.misses, cache.stats.allocations) == (1, 1, 1)

    def test_direct_mapped_conflict(self, store):
        store.write(1, _tile(1))
        store.write(5, _tile(5))
        cache = TileCache("c", CacheConfig(rows=4), store)
        cache.read(1)
        cache.read(5)  # same line, evicts address 1
        cache.read(1)
        assert cache.stats.misses == 3
        assert cache.stats.hits == 0

    def test_write_around_does_not_allocate(self, store):
        cache = TileCache("c", CacheConfig(rows=4), store, WriteMissPolicy.WRITE_AROUND)
        latency = cache.write(2, _tile(7))
        assert latency == cache.config.miss_latency
        assert cache.lookup(2) is None
        assert store.peek(2).values[0, 0] == 7.0
        cache.read(2)
        assert cache.stats.misses == 1

    def test_write_allocate_no_fetch(self, store):
        cache = TileCache("c", CacheConfig(rows=4), store, WriteMissPolicy.WRITE_ALLOCATE_NO_FETCH)
        cache.write(2, _tile(7))
        assert cache.lookup(2).values[0, 0] == 7.0
        _, latency = cache.read(2)
        assert latency == cache.config.cache_hit_time
        assert cache.stats.hits == 1
        assert cache.stats.allocations == 1

    def test_write_hit_updates_line_and_backing(self, store):
        store.write(3, _tile(1))
        cache = TileCache("c", CacheConfig(rows=4), store)
        cache.read(3)
        assert cache.write(3, _tile(9)) == cache.config.cache_hit_time
        assert cache.stats.write_hits == 1
        assert cache.lookup(3).values[0, 0] == 9.0
        assert store.peek(3).values[0, 0] == 9.0
        assert cache.coherent()


class TestEffectiveAccessTime:
    def test_formula(self):
        cfg = CacheConfig(rows=1, dram_penalty=10.0)
        assert effective_access_time(None, cfg, hit_rate=0.9) == pytest.approx(1.9)
        assert effective_access_time(None, cfg, hit_rate=1.0) == 1.0
        assert effective_access_time(None, cfg, hit_rate=0.0) == 10.0

    def test_measured(self):
        stats = CacheStats(hits=3, misses=1)
        assert effective_access_time(stats, CacheConfig(rows=1, dram_penalty=5.0)) == pytest.approx(0.75 + 1.25)

    def test_undefined_without_accesses(self):
        with pytest.raises(ValueError, match="zero accesses"):
            effective_access_time(CacheStats(), CacheConfig(rows=1))
        with pytest.raises(ValueError):
            effective_access_time(None, CacheConfig(rows=1), hit_rate=1.5)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CacheConfig(rows=6)
        with pytest.raises(ValueError):
            CacheConfig(rows=4, dram_penalty=0.5)


class TestHierarchy:
    def _hierarchy(self, s=2, mode=CacheMode.COVARIANCE):
        return CacheHierarchy(s, CacheConfig(rows=8), CacheConfig(rows=4), mode)

    def test_mode_selects_policy(self):
        h = self._hierarchy()
        assert all(c.policy == WriteMissPolicy.WRITE_AROUND for c in h.caches)
        h.set_mode(CacheMode.ROTATION)
        assert all(c.policy == WriteMissPolicy.WRITE_ALLOCATE_NO_FETCH for c in h.caches)

    def test_write_invalidates_other_copies(self):
        h = self._hierarchy()
        region = h.define_region("x", 1, 1)
        h.backing.write(region.base, _tile(1))
        h.read_tile("lhs", region.base)
        h.read_tile(0, region.base)
        h.write_tile(1, region.base, _tile(2))
        assert h.lhs_shared.lookup(region.base) is None
        assert h.rhs_private[0].lookup(region.base) is None
        blk, _ = h.read_tile(0, region.base)
        assert blk.values[0, 0] == 2.0
        assert h.check_coherence()

    def test_stage_writes_only_changed_tiles(self):
        h = self._hierarchy()
        m = Matrix.real(np.arange(16, dtype=np.float64).reshape(4, 4))
        _, written = h.stage("m", tile(m, 2))
        assert written == 4
        h.read_tile("lhs", h.backing.region("m").base)
        changed = m.data.copy()
        changed[3, 3] = -1.0
        region, written = h.stage("m", tile(Matrix.real(changed), 2))
        assert written == 1
        # untouched tile stays cached, the rewritten one would be refetched
        assert h.lhs_shared.lookup(region.base) is not None
        assert h.backing.peek(region.address(1, 1)).values[1, 1] == -1.0

    def test_restage_with_new_shape_invalidates(self):
        h = self._hierarchy()
        region, _ = h.stage("m", tile(Matrix.real(np.ones((2, 2))), 2))
        h.read_tile("lhs", region.base)
        h.stage("m", tile(Matrix.real(np.ones((4, 4))), 2))
        assert h.lhs_shared.lookup(region.base) is None

    def test_unknown_side(self):
        h = self._hierarchy(s=1)
        with pytest.raises(ValueError):
            h.cache(3)
        with pytest.raises(ValueError):
            h.cache("rhs")
        with pytest.raises(ValueError):
            CacheHierarchy(0, CacheConfig(rows=1), CacheConfig(rows=1))

    def test_stats_rows(self):
        h = self._hierarchy(s=1)
        region, _ = h.stage("m", tile(Matrix.real(np.ones((2, 2))), 2))
        h.read_tile("lhs", region.base)
        h.read_tile("lhs", region.base)
        rows = h.stats_rows()
        assert [r.cache_id for r in rows] == ["lhs", "rhs0"]
        assert rows[0].measured_p == 0.5
        assert rows[0].eat == pytest.approx(0.5 * 1.0 + 0.5 * 10.0)
        assert rows[1].measured_p is None
        assert rows[1].eat is None
        assert rows[0].mode == "covariance"
