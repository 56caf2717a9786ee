"""Output-stationary TxT systolic MAC array and its matrix accumulator."""
import logging
from typing import List, Optional, Tuple

import numpy as np

from utils.matrix import SkewedStream, Tile, scalar_zeros
from utils.numerics import QFormat, SaturationCounter, fx_add_array, fx_mul_array

logger = logging.getLogger(__name__)


def tile_cycles(t: int, depth: Optional[int] = None) -> int:
    """Cycles of one product: operand depth plus 2(t-1) fill and drain."""
    return (t if depth is None else depth) + 2 * (t - 1)


class SystolicArray:
    """A grid of T x T MAC processing elements.

    Operands shift one PE per cycle: LHS values move right along rows, RHS
    values move down along columns, partial sums stay in place. Two entry
    points compute the same numbers: run_tile_product steps the grid cycle by
    cycle from skewed streams, tile_product applies the per-PE MAC sequence
    directly (k ascending, one multiply-add per step) and is what the engine
    uses by default.
    """

    def __init__(self, t: int, qformat: Optional[QFormat] = None, counter: Optional[SaturationCounter] = None):
        if t < 1:
            raise ValueError(f"array dimension must be >= 1, got {t}")
        self.t = t
        self.qformat = qformat
        self.counter = counter if counter is not None else SaturationCounter()
        self.busy = False
        self.cycle = 0
        self.fire_counts = np.zeros((t, t), dtype=np.int64)
        self.occupancy: List[int] = []
        self._reset_registers()

    def _reset_registers(self) -> None:
        t = self.t
        self.acc = scalar_zeros((t, t), self.qformat)
        self.a_reg = scalar_zeros((t, t), self.qformat)
        self.b_reg = scalar_zeros((t, t), self.qformat)
        self.a_valid = np.zeros((t, t), dtype=bool)
        self.b_valid = np.zeros((t, t), dtype=bool)

    def reset(self) -> None:
        self._reset_registers()
        self.cycle = 0
        self.busy = False
        self.fire_counts[:] = 0
        self.occupancy = []

    def _mac(self, a: np.ndarray, b: np.ndarray, mask: Optional[np.ndarray] = None) -> None:
        if self.qformat is None:
            prod = a * b
            self.acc = self.acc + prod if mask is None else np.where(mask, self.acc + prod, self.acc)
            return
        if mask is None:
            prod = fx_mul_array(a, b, self.qformat, self.counter)
            self.acc = fx_add_array(self.acc, prod, self.qformat, self.counter)
            return
        # Idle PEs see zero operands, so they cannot saturate
        prod = fx_mul_array(np.where(mask, a, 0), np.where(mask, b, 0), self.qformat, self.counter)
        summed = fx_add_array(self.acc, prod, self.qformat, self.counter)
        self.acc = np.where(mask, summed, self.acc).astype(self.qformat.raw_dtype, copy=False)

    def _check_seed(self, seed: Optional[Tile]) -> None:
        if seed is not None and (seed.t != self.t or seed.qformat != self.qformat):
            raise ValueError("seed tile does not match the array")

    def _preload(self, seed: Optional[Tile]) -> None:
        self.acc = scalar_zeros((self.t, self.t), self.qformat) if seed is None else seed.values.copy()

    def run_tile_product(self, lhs: SkewedStream, rhs: SkewedStream, seed: Optional[Tile] = None) -> Tuple[Tile, int]:
        """Step the grid until every PE has drained; returns (product, cycles).

        A stream may carry several tiles back-to-back, in which case the PEs
        accumulate the whole block. seed preloads the PE partial sums.
        """
        if lhs.t != self.t or rhs.t != self.t:
            raise ValueError(f"lane mismatch: array is {self.t}x{self.t}, streams have {lhs.t} and {rhs.t} lanes")
        if lhs.depth != rhs.depth:
            raise ValueError(f"operand depth mismatch: {lhs.depth} vs {rhs.depth}")
        if lhs.qformat != self.qformat or rhs.qformat != self.qformat:
            raise ValueError("stream numeric path does not match the array")
        self._check_seed(seed)
        if self.busy:
            raise ValueError("systolic array is busy")

        self.busy = True
        self._reset_registers()
        self._preload(seed)
        t = self.t
        total = tile_cycles(t, lhs.depth)
        fill = scalar_zeros(t, self.qformat)
        no_valid = np.zeros(t, dtype=bool)
        try:
            for c in range(total):
                # Shift operands one PE along, then inject the next stream slot
                self.a_reg[:, 1:] = self.a_reg[:, :-1]
                self.a_valid[:, 1:] = self.a_valid[:, :-1]
                self.b_reg[1:, :] = self.b_reg[:-1, :]
                self.b_valid[1:, :] = self.b_valid[:-1, :]
                in_stream = c < lhs.total_cycles
                self.a_reg[:, 0] = lhs.lanes[:, c] if in_stream else fill
                self.a_valid[:, 0] = lhs.valid[:, c] if in_stream else no_valid
                self.b_reg[0, :] = rhs.lanes[:, c] if in_stream else fill
                self.b_valid[0, :] = rhs.valid[:, c] if in_stream else no_valid

                firing = self.a_valid & self.b_valid
                fired = int(np.count_nonzero(firing))
                if fired:
                    self._mac(self.a_reg, self.b_reg, firing)
                    self.fire_counts += firing
                self.occupancy.append(fired)
                self.cycle += 1
        finally:
            self.busy = False
        product = Tile(t, self.acc.copy(), qformat=self.qformat)
        return product, total

    def tile_product(self, lhs: Tile, rhs: Tile, seed: Optional[Tile] = None) -> Tuple[Tile, int]:
        """Functional model of one tile product with the cycle cost 3T-2."""
        if lhs.t != self.t or rhs.t != self.t:
            raise ValueError(f"lane mismatch: array is {self.t}x{self.t}, tiles are {lhs.t} and {rhs.t}")
        if lhs.qformat != self.qformat or rhs.qformat != self.qformat:
            raise ValueError("tile numeric path does not match the array")
        self._check_seed(seed)
        if self.busy:
            raise ValueError("systolic array is busy")
        self._preload(seed)
        a, b = lhs.values, rhs.values
        for k in range(self.t):
            self._mac(a[:, k:k + 1], b[k:k + 1, :])
        self.cycle += tile_cycles(self.t)
        return Tile(self.t, self.acc.copy(), qformat=self.qformat), tile_cycles(self.t)

    def steady_state_full(self, start: int, stop: int) -> bool:
        """True when every PE fired on each cycle of [start, stop]."""
        window = self.occupancy[start:stop + 1]
        return len(window) == stop - start + 1 and all(n == self.t * self.t for n in window)


class Accumulator:
    """Sums the per-pass product tiles of one output block pair.

    The engine chains passes through the PEs instead: seed() goes back into
    the array as its starting partial and carry() latches the result, so each
    output keeps a single k-ascending sum.
    """

    def __init__(self, t: int, qformat: Optional[QFormat] = None, counter: Optional[SaturationCounter] = None):
        self.t = t
        self.qformat = qformat
        self.counter = counter if counter is not None else SaturationCounter()
        self.partial = scalar_zeros((t, t), qformat)
        self.passes_accumulated = 0

    def _check(self, product: Tile) -> None:
        if product.t != self.t:
            raise ValueError(f"accumulator is {self.t}x{self.t}, product tile is {product.t}x{product.t}")
        if product.qformat != self.qformat:
            raise ValueError("product tile numeric path does not match the accumulator")

    def accumulate(self, product: Tile) -> "Accumulator":
        self._check(product)
        if self.qformat is None:
            self.partial = self.partial + product.values
        else:
            self.partial = fx_add_array(self.partial, product.values, self.qformat, self.counter)
        self.passes_accumulated += 1
        return self

    def seed(self) -> Tile:
        return Tile(self.t, self.partial.copy(), qformat=self.qformat)

    def carry(self, product: Tile) -> "Accumulator":
        """Latch a product the array computed on top of seed()."""
        self._check(product)
        self.partial = product.values.copy()
        self.passes_accumulated += 1
        return self

    def drain(self, expected_passes: Optional[int] = None) -> Tile:
        if expected_passes is not None and self.passes_accumulated != expected_passes:
            raise ValueError(
                f"incomplete accumulation: {self.passes_accumulated} of {expected_passes} partial products"
            )
        out = Tile(self.t, self.partial, qformat=self.qformat)
        self.partial = scalar_zeros((self.t, self.t), self.qformat)
        self.passes_accumulated = 0
        return out
