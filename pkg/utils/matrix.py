"""Dense matrices, TxT tiling with zero padding, and the Matrix Padding Units."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from utils.numerics import QFormat, SaturationCounter, dequantize, fx_zeros, quantize

logger = logging.getLogger(__name__)


def scalar_zeros(shape, qformat: Optional[QFormat]) -> np.ndarray:
    if qformat is None:
        return np.zeros(shape, dtype=np.float64)
    return fx_zeros(shape, qformat)


@dataclass(frozen=True)
class Matrix:
    """Row-major dense matrix on either the real path or a fixed-point path.

    qformat is the path tag: None means float64 values, otherwise data holds
    raw fixed-point codes in that format.
    """

    data: np.ndarray
    qformat: Optional[QFormat] = None

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ValueError(f"Matrix data must be 2-D, got shape {self.data.shape}")

    @classmethod
    def real(cls, values) -> "Matrix":
        return cls(np.array(values, dtype=np.float64, ndmin=2))

    @classmethod
    def from_real(cls, values, qformat: Optional[QFormat] = None, counter: Optional[SaturationCounter] = None) -> "Matrix":
        """Build a matrix on the requested path, quantizing when qformat is set."""
        arr = np.array(values, dtype=np.float64, ndmin=2)
        if qformat is None:
            return cls(arr)
        return cls(quantize(arr, qformat, counter), qformat)

    @classmethod
    def zeros(cls, rows: int, cols: int, qformat: Optional[QFormat] = None) -> "Matrix":
        return cls(scalar_zeros((rows, cols), qformat), qformat)

    @classmethod
    def identity(cls, n: int, qformat: Optional[QFormat] = None) -> "Matrix":
        m = scalar_zeros((n, n), qformat)
        one = 1.0 if qformat is None else qformat.scale
        for i in range(n):
            m[i, i] = one
        return cls(m, qformat)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    @property
    def is_fixed(self) -> bool:
        return self.qformat is not None

    def to_real(self) -> np.ndarray:
        if self.qformat is None:
            return self.data.astype(np.float64, copy=True)
        return dequantize(self.data, self.qformat)

    def check_same_path(self, other: "Matrix") -> None:
        if self.qformat != other.qformat:
            raise ValueError(f"mixed numeric paths: {self.qformat} vs {other.qformat}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.qformat == other.qformat and self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass
class Tile:
    """A TxT block. Entries outside valid_rows x valid_cols are zero padding."""

    t: int
    values: np.ndarray
    origin: Tuple[int, int] = (0, 0)
    valid_rows: int = 0
    valid_cols: int = 0
    qformat: Optional[QFormat] = None

    def __post_init__(self):
        if self.values.shape != (self.t, self.t):
            raise ValueError(f"tile values must be {self.t}x{self.t}, got {self.values.shape}")
        if not self.valid_rows:
            self.valid_rows = self.t
        if not self.valid_cols:
            self.valid_cols = self.t

    @classmethod
    def zeros(cls, t: int, qformat: Optional[QFormat] = None, origin: Tuple[int, int] = (0, 0)) -> "Tile":
        return cls(t, scalar_zeros((t, t), qformat), origin, t, t, qformat)

    def copy(self) -> "Tile":
        return Tile(self.t, self.values.copy(), self.origin, self.valid_rows, self.valid_cols, self.qformat)

    def padding_is_zero(self) -> bool:
        mask = np.ones((self.t, self.t), dtype=bool)
        mask[: self.valid_rows, : self.valid_cols] = False
        return not np.any(self.values[mask] != 0)


@dataclass
class TiledMatrix:
    """A matrix partitioned into a grid of zero-padded TxT tiles."""

    rows: int
    cols: int
    t: int
    tiles: List[List[Tile]]
    qformat: Optional[QFormat] = None

    @property
    def grid_rows(self) -> int:
        return len(self.tiles)

    @property
    def grid_cols(self) -> int:
        return len(self.tiles[0]) if self.tiles else 0

    @property
    def grid(self) -> Tuple[int, int]:
        return self.grid_rows, self.grid_cols

    def tile_at(self, block_row: int, block_col: int) -> Tile:
        return self.tiles[block_row][block_col]

    def reassemble(self) -> Matrix:
        """Stitch the tiles back together and crop the padding."""
        full = scalar_zeros((self.grid_rows * self.t, self.grid_cols * self.t), self.qformat)
        for br, row in enumerate(self.tiles):
            for bc, blk in enumerate(row):
                full[br * self.t:(br + 1) * self.t, bc * self.t:(bc + 1) * self.t] = blk.values
        return Matrix(full[: self.rows, : self.cols].copy(), self.qformat)


def grid_dims(rows: int, cols: int, t: int) -> Tuple[int, int]:
    """Tile-grid dimensions of a rows x cols matrix."""
    if t < 1:
        raise ValueError(f"tile size must be >= 1, got {t}")
    return -(-rows // t), -(-cols // t)


def tile(m: Matrix, t: int) -> TiledMatrix:
    """Partition m into ceil(rows/t) x ceil(cols/t) tiles, zero-padding the edges."""
    grid_r, grid_c = grid_dims(m.rows, m.cols, t)
    tiles: List[List[Tile]] = []
    for br in range(grid_r):
        row_tiles = []
        r0 = br * t
        vr = min(t, m.rows - r0)
        for bc in range(grid_c):
            c0 = bc * t
            vc = min(t, m.cols - c0)
            values = scalar_zeros((t, t), m.qformat)
            values[:vr, :vc] = m.data[r0:r0 + vr, c0:c0 + vc]
            row_tiles.append(Tile(t, values, (br, bc), vr, vc, m.qformat))
        tiles.append(row_tiles)
    return TiledMatrix(m.rows, m.cols, t, tiles, m.qformat)


def transpose_view(m: Matrix) -> Matrix:
    return Matrix(m.data.T.copy(), m.qformat)


@dataclass
class SkewedStream:
    """Per-lane input queues of a systolic array, including the stagger zeros.

    lanes[i, c] is the value entering lane i at cycle c; valid marks slots
    that carry real operands (stagger and trailing slots are False).
    """

    lanes: np.ndarray
    valid: np.ndarray
    depth: int
    profile: str
    qformat: Optional[QFormat] = None

    @property
    def t(self) -> int:
        return self.lanes.shape[0]

    @property
    def total_cycles(self) -> int:
        return self.lanes.shape[1]


def _skew(columns: Sequence[np.ndarray], t: int, profile: str, qformat: Optional[QFormat]) -> SkewedStream:
    """Lane i carries its operand sequence delayed by i cycles."""
    depth = sum(c.shape[1] for c in columns)
    total = t + depth - 1
    lanes = scalar_zeros((t, total), qformat)
    valid = np.zeros((t, total), dtype=bool)
    body = np.concatenate(columns, axis=1) if len(columns) > 1 else columns[0]
    for i in range(t):
        lanes[i, i:i + depth] = body[i]
        valid[i, i:i + depth] = True
    return SkewedStream(lanes, valid, depth, profile, qformat)


def mpu_skew_lhs(tile_or_block) -> SkewedStream:
    """LHS Matrix Padding Unit: row i of the operand enters lane i delayed i cycles.

    Accepts one Tile or a sequence of tiles streamed back-to-back (a block).
    """
    tiles = [tile_or_block] if isinstance(tile_or_block, Tile) else list(tile_or_block)
    _check_block(tiles)
    return _skew([blk.values for blk in tiles], tiles[0].t, "lhs", tiles[0].qformat)


def mpu_skew_rhs(tile_or_block) -> SkewedStream:
    """RHS Matrix Padding Unit: column j of the operand enters lane j delayed j cycles."""
    tiles = [tile_or_block] if isinstance(tile_or_block, Tile) else list(tile_or_block)
    _check_block(tiles)
    return _skew([blk.values.T for blk in tiles], tiles[0].t, "rhs", tiles[0].qformat)


def _check_block(tiles: List[Tile]) -> None:
    if not tiles:
        raise ValueError("MPU needs at least one tile")
    t = tiles[0].t
    for blk in tiles:
        if blk.t != t:
            raise ValueError(f"block mixes tile sizes {t} and {blk.t}")
        if blk.qformat != tiles[0].qformat:
            raise ValueError("block mixes numeric paths")
