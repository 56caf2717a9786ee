import numpy as np
import pytest

from services.systolic_service import Accumulator, SystolicArray, tile_cycles
from tests.conftest import int_matrix
from utils.matrix import Matrix, Tile, mpu_skew_lhs, mpu_skew_rhs, tile
from utils.numerics import QFormat, SaturationCounter


@pytest.mark.parametrize("t", [2, 3, 4, 8])
def test_cycle_stepped_matches_functional(rng, t):
    a = Tile(t, int_matrix(rng, t, t))
    b = Tile(t, int_matrix(rng, t, t))
    array = SystolicArray(t)
    stepped, cycles = array.run_tile_product(mpu_skew_lhs(a), mpu_skew_rhs(b))
    functional, cost = SystolicArray(t).tile_product(a, b)
    assert cycles == cost == 3 * t - 2
    assert np.array_equal(stepped.values, a.values @ b.values)
    assert np.array_equal(functional.values, stepped.values)


def test_fixed_path_bit_identical(rng, q16):
    t = 4
    a = tile(Matrix.from_real(rng.uniform(-2, 2, size=(t, t)), q16), t).tile_at(0, 0)
    b = tile(Matrix.from_real(rng.uniform(-2, 2, size=(t, t)), q16), t).tile_at(0, 0)
    stepped, _ = SystolicArray(t, q16).run_tile_product(mpu_skew_lhs(a), mpu_skew_rhs(b))
    functional, _ = SystolicArray(t, q16).tile_product(a, b)
    assert np.array_equal(stepped.values, functional.values)
    real = a.values / q16.scale @ (b.values / q16.scale)
    assert np.max(np.abs(stepped.values / q16.scale - real)) < t * q16.ulp * 2


def test_block_streaming_accumulates_and_fills_the_array(rng):
    t, k = 4, 3
    lhs = [Tile(t, int_matrix(rng, t, t)) for _ in range(k)]
    rhs = [Tile(t, int_matrix(rng, t, t)) for _ in range(k)]
    array = SystolicArray(t)
    product, cycles = array.run_tile_product(mpu_skew_lhs(lhs), mpu_skew_rhs(rhs))
    expected = sum(x.values @ y.values for x, y in zip(lhs, rhs))
    assert np.array_equal(product.values, expected)
    assert cycles == tile_cycles(t, k * t) == k * t + 2 * (t - 1)
    # every PE fires once per streamed operand pair
    assert (array.fire_counts == k * t).all()
    assert array.steady_state_full(2 * t - 2, k * t - 1)
    assert not array.steady_state_full(0, k * t - 1)


def test_idle_pes_do_not_fire_outside_the_wave(rng):
    t = 3
    array = SystolicArray(t)
    a = Tile(t, int_matrix(rng, t, t))
    array.run_tile_product(mpu_skew_lhs(a), mpu_skew_rhs(a))
    assert array.occupancy[0] == 1
    assert array.occupancy[-1] == 1
    assert sum(array.occupancy) == t ** 3


def test_rejects_mismatched_streams(q16):
    array = SystolicArray(4)
    with pytest.raises(ValueError):
        array.run_tile_product(mpu_skew_lhs(Tile.zeros(3)), mpu_skew_rhs(Tile.zeros(3)))
    with pytest.raises(ValueError):
        array.run_tile_product(mpu_skew_lhs(Tile.zeros(4)), mpu_skew_rhs([Tile.zeros(4), Tile.zeros(4)]))
    with pytest.raises(ValueError):
        array.tile_product(Tile.zeros(4, q16), Tile.zeros(4, q16))


def test_busy_array_rejects_work():
    array = SystolicArray(2)
    array.busy = True
    with pytest.raises(ValueError, match="busy"):
        array.tile_product(Tile.zeros(2), Tile.zeros(2))


def test_reset_clears_state(rng):
    array = SystolicArray(2)
    a = Tile(2, int_matrix(rng, 2, 2))
    array.run_tile_product(mpu_skew_lhs(a), mpu_skew_rhs(a))
    array.reset()
    assert array.cycle == 0
    assert array.occupancy == []
    assert not array.fire_counts.any()


def test_accumulator_drain():
    acc = Accumulator(2)
    acc.accumulate(Tile(2, np.ones((2, 2)))).accumulate(Tile(2, 2 * np.ones((2, 2))))
    with pytest.raises(ValueError, match="incomplete accumulation"):
        acc.drain(expected_passes=3)
    out = acc.drain(expected_passes=2)
    assert np.array_equal(out.values, 3 * np.ones((2, 2)))
    assert acc.passes_accumulated == 0
    assert not acc.partial.any()


def test_accumulator_checks_shape_and_path(q16):
    acc = Accumulator(2)
    with pytest.raises(ValueError):
        acc.accumulate(Tile.zeros(3))
    with pytest.raises(ValueError):
        acc.accumulate(Tile.zeros(2, q16))


def test_fixed_accumulator_saturates():
    fmt = QFormat(4, 4)
    counter = SaturationCounter()
    acc = Accumulator(2, fmt, counter)
    big = Tile(2, np.full((2, 2), fmt.max_raw, dtype=np.int64), qformat=fmt)
    acc.accumulate(big).accumulate(big)
    assert counter.count == 4
    assert (acc.drain().values == fmt.max_raw).all()


def test_seeded_products_continue_the_running_sum(rng):
    t = 4
    a = [Tile(t, rng.uniform(-1, 1, size=(t, t))) for _ in range(3)]
    b = [Tile(t, rng.uniform(-1, 1, size=(t, t))) for _ in range(3)]
    expected = np.zeros((t, t))
    for i in range(t):
        for j in range(t):
            total = 0.0
            for x, y in zip(a, b):
                for k in range(t):
                    total += x.values[i, k] * y.values[k, j]
            expected[i, j] = total

    for stepped in (False, True):
        array, acc = SystolicArray(t), Accumulator(t)
        for x, y in zip(a, b):
            if stepped:
                product, _ = array.run_tile_product(mpu_skew_lhs(x), mpu_skew_rhs(y), seed=acc.seed())
            else:
                product, _ = array.tile_product(x, y, seed=acc.seed())
            acc.carry(product)
        assert np.array_equal(acc.drain(expected_passes=3).values, expected)


def test_seed_must_match_the_array(q16):
    array = SystolicArray(2)
    with pytest.raises(ValueError, match="seed"):
        array.tile_product(Tile.zeros(2), Tile.zeros(2), seed=Tile.zeros(2, q16))
    with pytest.raises(ValueError, match="seed"):
        array.run_tile_product(mpu_skew_lhs(Tile.zeros(2)), mpu_skew_rhs(Tile.zeros(2)), seed=Tile.zeros(3))


def test_carry_counts_passes_and_replaces_the_partial():
    acc = Accumulator(2)
    acc.accumulate(Tile(2, np.ones((2, 2))))
    acc.carry(Tile(2, 5 * np.ones((2, 2))))
    assert acc.passes_accumulated == 2
    assert np.array_equal(acc.seed().values, 5 * np.ones((2, 2)))
    with pytest.raises(ValueError):
        acc.carry(Tile.zeros(3))
