"""Signed fixed-point arithmetic and the CORDIC kernels of the hardware datapath.

Scalars are carried as raw two's-complement integers tagged with a QFormat.
Multiplication truncates toward zero, every result saturates at the format
bounds, and callers that care pass a SaturationCounter to observe clipping.
Array helpers operate on numpy raw arrays (int64 when products fit, Python
ints in object arrays for wider formats).
"""
import logging
import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# Extra fraction bits carried inside the CORDIC datapath
CORDIC_GUARD_BITS = 8

# Largest total width whose raw products still fit in int64
NARROW_TOTAL_BITS = 32


@dataclass(frozen=True)
class QFormat:
    """Signed Q(I.F) format; integer_bits includes the sign bit."""

    integer_bits: int
    fraction_bits: int

    def __post_init__(self):
        if self.integer_bits < 1:
            raise ValueError(f"integer_bits must be >= 1 (sign included), got {self.integer_bits}")
        if self.fraction_bits < 1:
            raise ValueError(f"fraction_bits must be >= 1, got {self.fraction_bits}")
        if self.integer_bits + self.fraction_bits > 64:
            raise ValueError(f"Q{self.integer_bits}.{self.fraction_bits} exceeds 64 bits")

    @classmethod
    def parse(cls, text: str) -> "QFormat":
        """Parse 'I.F' (optionally prefixed with 'Q')."""
        body = text.strip().lstrip("Qq")
        try:
            integer_bits, fraction_bits = (int(part) for part in body.split("."))
        except ValueError:
            raise ValueError(f"Q format must look like I.F, got {text!r}")
        return cls(integer_bits, fraction_bits)

    @property
    def total_bits(self) -> int:
        return self.integer_bits + self.fraction_bits

    @property
    def scale(self) -> int:
        return 1 << self.fraction_bits

    @property
    def max_raw(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def ulp(self) -> float:
        return 2.0 ** -self.fraction_bits

    @property
    def wide(self) -> bool:
        """Raw products overflow int64, so arrays hold Python ints."""
        return self.total_bits > NARROW_TOTAL_BITS

    @property
    def raw_dtype(self):
        return object if self.wide else np.int64

    def __str__(self) -> str:
        return f"Q{self.integer_bits}.{self.fraction_bits}"


DEFAULT_QFORMAT = QFormat(16, 16)


class SaturationCounter:
    """Counts clipping events; safe to share between worker threads."""

    def __init__(self):
        self.count = 0
        self._lock = threading.Lock()

    def add(self, events: int = 1) -> None:
        if events:
            with self._lock:
                self.count += events

    def merge(self, other: "SaturationCounter") -> None:
        self.add(other.count)


def _saturate(value: int, fmt: QFormat, counter: Optional[SaturationCounter]) -> int:
    if value > fmt.max_raw:
        if counter is not None:
            counter.add()
        return fmt.max_raw
    if value < fmt.min_raw:
        if counter is not None:
            counter.add()
        return fmt.min_raw
    return value


def _truncate_shift(value: int, bits: int) -> int:
    """Right shift rounding toward zero."""
    if value >= 0:
        return value >> bits
    return -((-value) >> bits)


@dataclass(frozen=True)
class Fixed:
    """A fixed-point scalar: raw integer plus its format."""

    raw: int
    format: QFormat = DEFAULT_QFORMAT

    @classmethod
    def from_real(cls, value: float, fmt: QFormat = DEFAULT_QFORMAT, counter: Optional[SaturationCounter] = None) -> "Fixed":
        if not math.isfinite(value):
            raise ValueError(f"cannot quantize non-finite value {value}")
        return cls(_saturate(round(value * fmt.scale), fmt, counter), fmt)

    @classmethod
    def from_raw(cls, raw: int, fmt: QFormat = DEFAULT_QFORMAT, counter: Optional[SaturationCounter] = None) -> "Fixed":
        return cls(_saturate(int(raw), fmt, counter), fmt)

    @classmethod
    def zero(cls, fmt: QFormat = DEFAULT_QFORMAT) -> "Fixed":
        return cls(0, fmt)

    @classmethod
    def one(cls, fmt: QFormat = DEFAULT_QFORMAT) -> "Fixed":
        return cls(_saturate(fmt.scale, fmt, None), fmt)

    def to_real(self) -> float:
        return self.raw / self.format.scale

    def __float__(self) -> float:
        return self.to_real()

    def __add__(self, other: "Fixed") -> "Fixed":
        return fixed_add(self, other)

    def __sub__(self, other: "Fixed") -> "Fixed":
        return fixed_sub(self, other)

    def __mul__(self, other: "Fixed") -> "Fixed":
        return fixed_mul(self, other)

    def __neg__(self) -> "Fixed":
        return Fixed(_saturate(-self.raw, self.format, None), self.format)


def _check_formats(a: Fixed, b: Fixed) -> None:
    if a.format != b.format:
        raise ValueError(f"fixed-point format mismatch: {a.format} vs {b.format}")


def fixed_add(a: Fixed, b: Fixed, counter: Optional[SaturationCounter] = None) -> Fixed:
    _check_formats(a, b)
    return Fixed(_saturate(a.raw + b.raw, a.format, counter), a.format)


def fixed_sub(a: Fixed, b: Fixed, counter: Optional[SaturationCounter] = None) -> Fixed:
    _check_formats(a, b)
    return Fixed(_saturate(a.raw - b.raw, a.format, counter), a.format)


def fixed_mul(a: Fixed, b: Fixed, counter: Optional[SaturationCounter] = None) -> Fixed:
    """Full-width product, truncated toward zero, then saturated."""
    _check_formats(a, b)
    product = _truncate_shift(a.raw * b.raw, a.format.fraction_bits)
    return Fixed(_saturate(product, a.format, counter), a.format)


def fixed_shift_right(a: Fixed, bits: int = 1) -> Fixed:
    """Arithmetic right shift, as done by a hardware shifter."""
    return Fixed(a.raw >> bits, a.format)


# ---------------------------------------------------------------------------
# Raw-array helpers
# ---------------------------------------------------------------------------

def saturate_array(values: np.ndarray, fmt: QFormat, counter: Optional[SaturationCounter] = None) -> np.ndarray:
    over = values > fmt.max_raw
    under = values < fmt.min_raw
    events = int(np.count_nonzero(over)) + int(np.count_nonzero(under))
    if events:
        if counter is not None:
            counter.add(events)
        values = np.where(over, fmt.max_raw, np.where(under, fmt.min_raw, values))
    return values.astype(fmt.raw_dtype, copy=False)


def _truncate_shift_array(values: np.ndarray, bits: int) -> np.ndarray:
    return np.where(values >= 0, values >> bits, -((-values) >> bits))


def quantize(values, fmt: QFormat, counter: Optional[SaturationCounter] = None) -> np.ndarray:
    """Round real values to the nearest raw code, saturating at the bounds."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot quantize non-finite values")
    scaled = np.round(arr * fmt.scale)
    if fmt.wide:
        raw = np.array([int(v) for v in scaled.ravel()], dtype=object).reshape(arr.shape)
        return saturate_array(raw, fmt, counter)
    over = scaled > fmt.max_raw
    under = scaled < fmt.min_raw
    events = int(np.count_nonzero(over)) + int(np.count_nonzero(under))
    if events and counter is not None:
        counter.add(events)
    return np.clip(scaled, fmt.min_raw, fmt.max_raw).astype(np.int64)


def fx_widen_array(raw: np.ndarray, src: QFormat, dst: QFormat) -> np.ndarray:
    """Exact move to a format with the same integer bits and more fraction bits."""
    shift = dst.fraction_bits - src.fraction_bits
    if dst.integer_bits != src.integer_bits or shift < 0:
        raise ValueError(f"cannot widen {src} to {dst}")
    return np.asarray(raw).astype(dst.raw_dtype) * (1 << shift)


def dequantize(raw: np.ndarray, fmt: QFormat) -> np.ndarray:
    return np.asarray(raw).astype(np.float64) / fmt.scale


def fx_zeros(shape, fmt: QFormat) -> np.ndarray:
    if fmt.wide:
        return np.full(shape, 0, dtype=object)
    return np.zeros(shape, dtype=np.int64)


def fx_add_array(a: np.ndarray, b: np.ndarray, fmt: QFormat, counter: Optional[SaturationCounter] = None) -> np.ndarray:
    return saturate_array(a + b, fmt, counter)


def fx_sub_array(a: np.ndarray, b: np.ndarray, fmt: QFormat, counter: Optional[SaturationCounter] = None) -> np.ndarray:
    return saturate_array(a - b, fmt, counter)


def fx_mul_array(a: np.ndarray, b: np.ndarray, fmt: QFormat, counter: Optional[SaturationCounter] = None) -> np.ndarray:
    """Elementwise fixed multiply: truncate toward zero, then saturate."""
    return saturate_array(_truncate_shift_array(a * b, fmt.fraction_bits), fmt, counter)


# ---------------------------------------------------------------------------
# CORDIC
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _atan_table(iterations: int, bits: int) -> Tuple[int, ...]:
    return tuple(round(math.atan(2.0 ** -i) * (1 << bits)) for i in range(iterations))


@lru_cache(maxsize=None)
def _gain(iterations: int) -> float:
    k = 1.0
    for i in range(iterations):
        k /= math.sqrt(1.0 + 2.0 ** (-2 * i))
    return k


def _round_guard(value: int, guard_bits: int) -> int:
    return (value + (1 << (guard_bits - 1))) >> guard_bits


@dataclass(frozen=True)
class CordicConfig:
    """Iteration depth and format of the CORDIC units.

    gain_compensation is the precomputed K = prod 1/sqrt(1 + 2^(-2i)),
    quantized with the guard bits of the datapath; cordic_sincos seeds its
    x register with it. residual_correction applies one
    first-order step on the leftover angle after the last micro-rotation.
    """

    iterations: int
    format: QFormat = DEFAULT_QFORMAT
    residual_correction: bool = True
    gain_compensation: Fixed = field(init=False, repr=False)

    def __post_init__(self):
        if self.iterations < 4:
            raise ValueError(f"CORDIC needs at least 4 iterations, got {self.iterations}")
        object.__setattr__(self, "gain_compensation", Fixed.from_real(_gain(self.iterations), QFormat(2, min(self.work_bits, 62))))

    @classmethod
    def for_format(cls, fmt: QFormat = DEFAULT_QFORMAT, iterations: Optional[int] = None) -> "CordicConfig":
        """Default depth is one iteration per fraction bit."""
        return cls(iterations if iterations is not None else fmt.fraction_bits, fmt)

    @property
    def error_bound(self) -> float:
        """Documented worst-case error: atan(2^-(n-1)) plus two ULP."""
        return math.atan(2.0 ** -(self.iterations - 1)) + 2 * self.format.ulp

    @property
    def work_bits(self) -> int:
        return self.format.fraction_bits + CORDIC_GUARD_BITS


class VectoringResult(NamedTuple):
    angle: Fixed
    degenerate: bool


def cordic_atan(y: Fixed, x: Fixed, cfg: CordicConfig) -> VectoringResult:
    """Vectoring-mode arctangent of y/x, range (-pi/2, pi/2].

    (x, y) is reflected through the origin when x < 0 so the vector starts in
    the right half plane. (0, 0) yields angle 0 flagged as degenerate.
    """
    _check_formats(y, x)
    if y.format != cfg.format:
        raise ValueError(f"CORDIC configured for {cfg.format}, got {y.format}")
    yr, xr = y.raw, x.raw
    if xr == 0 and yr == 0:
        logger.warning("cordic_atan called with (0, 0); returning degenerate zero angle")
        return VectoringResult(Fixed.zero(cfg.format), True)
    if xr < 0 or (xr == 0 and yr < 0):
        xr, yr = -xr, -yr

    # Common left shift so the shifted terms keep full precision
    work_bits = cfg.work_bits
    shift = work_bits + 2 - max(abs(xr), abs(yr)).bit_length()
    if shift > 0:
        xr <<= shift
        yr <<= shift

    z = 0
    for i, step in enumerate(_atan_table(cfg.iterations, work_bits)):
        if yr == 0:
            break
        if yr > 0:
            xr, yr, z = xr + (yr >> i), yr - (xr >> i), z + step
        else:
            xr, yr, z = xr - (yr >> i), yr + (xr >> i), z - step
    if cfg.residual_correction and yr != 0:
        z += (yr << work_bits) // xr
    return VectoringResult(Fixed.from_raw(_round_guard(z, CORDIC_GUARD_BITS), cfg.format), False)


def cordic_sincos(theta: Fixed, cfg: CordicConfig) -> Tuple[Fixed, Fixed]:
    """Rotation-mode CORDIC: returns (sin(theta), cos(theta)), |theta| <= pi/2."""
    if theta.format != cfg.format:
        raise ValueError(f"CORDIC configured for {cfg.format}, got {theta.format}")
    if abs(theta.to_real()) > math.pi / 2 + cfg.format.ulp:
        raise ValueError(f"CORDIC rotation angle {theta.to_real():.6f} outside [-pi/2, pi/2]")

    work_bits = cfg.work_bits
    z = theta.raw << CORDIC_GUARD_BITS
    gain = cfg.gain_compensation
    x = gain.raw << (work_bits - gain.format.fraction_bits)
    y = 0
    for i, step in enumerate(_atan_table(cfg.iterations, work_bits)):
        if z >= 0:
            x, y, z = x - (y >> i), y + (x >> i), z - step
        else:
            x, y, z = x + (y >> i), y - (x >> i), z + step
    if cfg.residual_correction and z != 0:
        x, y = x - ((y * z) >> work_bits), y + ((x * z) >> work_bits)

    fmt = cfg.format
    sin_theta = Fixed.from_raw(_round_guard(y, CORDIC_GUARD_BITS), fmt)
    cos_theta = Fixed.from_raw(_round_guard(x, CORDIC_GUARD_BITS), fmt)
    return sin_theta, cos_theta
