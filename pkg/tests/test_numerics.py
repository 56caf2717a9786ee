import logging
import math

import numpy as np
import pytest

from utils.numerics import (
    CordicConfig,
    Fixed,
    QFormat,
    SaturationCounter,
    cordic_atan,
    cordic_sincos,
    dequantize,
    fixed_add,
    fixed_mul,
    fixed_shift_right,
    fx_mul_array,
    fx_widen_array,
    quantize,
)


class TestQFormat:
    def test_parse(self):
        fmt = QFormat.parse("16.16")
        assert (fmt.integer_bits, fmt.fraction_bits) == (16, 16)
        assert QFormat.parse("Q8.8") == QFormat(8, 8)

    def test_bounds(self):
        fmt = QFormat(16, 16)
        assert fmt.max_raw == 2 ** 31 - 1
        assert fmt.min_raw == -(2 ** 31)
        assert fmt.ulp == 2.0 ** -16
        assert not fmt.wide
        assert QFormat(32, 32).wide

    @pytest.mark.parametrize("text", ["16", "a.b", "16.16.16", ""])
    def test_parse_rejects_malformed(self, text):
        with pytest.raises(ValueError):
            QFormat.parse(text)

    def test_rejects_empty_fields(self):
        with pytest.raises(ValueError):
            QFormat(0, 8)
        with pytest.raises(ValueError):
            QFormat(8, 0)
        with pytest.raises(ValueError):
            QFormat(40, 40)


class TestFixed:
    def test_from_real(self, q16):
        assert Fixed.from_real(1.5, q16).raw == 98304
        assert Fixed.from_real(-0.25, q16).to_real() == -0.25

    def test_multiply_truncates_toward_zero(self):
        fmt = QFormat(8, 8)
        tiny = Fixed.from_raw(1, fmt)
        assert fixed_mul(Fixed.from_raw(3, fmt), tiny).raw == 0
        assert fixed_mul(Fixed.from_raw(-3, fmt), tiny).raw == 0
        assert fixed_mul(Fixed.from_raw(-384, fmt), Fixed.from_raw(128, fmt)).raw == -192

    def test_saturation_is_counted(self):
        fmt = QFormat(8, 8)
        counter = SaturationCounter()
        big = Fixed.from_real(200.0, fmt, counter)
        assert big.raw == fmt.max_raw
        assert counter.count == 1
        total = fixed_add(big, Fixed.from_real(1.0, fmt), counter)
        assert total.raw == fmt.max_raw
        assert counter.count == 2
        low = fixed_mul(Fixed.from_real(-100.0, fmt), Fixed.from_real(100.0, fmt), counter)
        assert low.raw == fmt.min_raw
        assert counter.count == 3

    def test_format_mismatch(self):
        with pytest.raises(ValueError):
            fixed_add(Fixed.from_real(1.0, QFormat(8, 8)), Fixed.from_real(1.0, QFormat(16, 16)))

    def test_operators(self, q16):
        a, b = Fixed.from_real(2.5, q16), Fixed.from_real(-1.25, q16)
        assert (a + b).to_real() == 1.25
        assert (a - b).to_real() == 3.75
        assert (a * b).to_real() == -3.125
        assert (-a).to_real() == -2.5

    def test_shift_right(self, q16):
        assert fixed_shift_right(Fixed.from_real(3.0, q16)).to_real() == 1.5
        assert fixed_shift_right(Fixed.from_raw(-3, q16)).raw == -2

    def test_non_finite_rejected(self, q16):
        with pytest.raises(ValueError):
            Fixed.from_real(float("nan"), q16)


class TestArrays:
    def test_quantize_counts_saturations(self):
        fmt = QFormat(4, 4)
        counter = SaturationCounter()
        raw = quantize([1.0, 100.0, -100.0, 0.5], fmt, counter)
        assert counter.count == 2
        assert list(raw) == [16, fmt.max_raw, fmt.min_raw, 8]
        assert dequantize(raw, fmt)[0] == 1.0

    def test_array_multiply_matches_scalar(self, rng, q16):
        a = rng.integers(-(2 ** 20), 2 ** 20, size=200)
        b = rng.integers(-(2 ** 20), 2 ** 20, size=200)
        out = fx_mul_array(a, b, q16)
        expected = [fixed_mul(Fixed.from_raw(int(x), q16), Fixed.from_raw(int(y), q16)).raw for x, y in zip(a, b)]
        assert list(out) == expected

    def test_wide_format_uses_python_ints(self):
        fmt = QFormat(32, 32)
        a = quantize([1.5, -2.0], fmt)
        b = quantize([2.0, 3.0], fmt)
        assert a.dtype == object
        assert list(dequantize(fx_mul_array(a, b, fmt), fmt)) == [3.0, -6.0]

    def test_widen_is_exact(self, q16):
        wide = QFormat(16, 28)
        raw = quantize([1.5, -0.25, 3.0e-5], q16)
        widened = fx_widen_array(raw, q16, wide)
        assert widened.dtype == object
        assert list(dequantize(widened, wide)) == list(dequantize(raw, q16))
        with pytest.raises(ValueError, match="widen"):
            fx_widen_array(raw, q16, QFormat(8, 24))


class TestCordic:
    def test_config(self, q16):
        cfg = CordicConfig.for_format(q16)
        assert cfg.iterations == 16
        assert cfg.error_bound == pytest.approx(math.atan(2.0 ** -15) + 2 * q16.ulp)
        with pytest.raises(ValueError):
            CordicConfig(3, q16)

    def test_atan_accuracy(self, rng, q16):
        cfg = CordicConfig(16, q16)
        worst = 0.0
        for y, x in rng.uniform(-100.0, 100.0, size=(10_000, 2)):
            fy, fx = Fixed.from_real(y, q16), Fixed.from_real(x, q16)
            if fx.raw == 0 and fy.raw == 0:
                continue
            yq, xq = fy.to_real(), fx.to_real()
            expected = math.atan(yq / xq) if xq != 0 else math.pi / 2
            result = cordic_atan(fy, fx, cfg)
            assert not result.degenerate
            worst = max(worst, abs(result.angle.to_real() - expected))
        assert worst <= cfg.error_bound

    def test_atan_quadrants(self, q16):
        cfg = CordicConfig(16, q16)
        one = Fixed.from_real(1.0, q16)
        assert cordic_atan(one, one, cfg).angle.to_real() == pytest.approx(math.pi / 4, abs=1e-4)
        # x < 0 is reflected through the origin
        assert cordic_atan(one, -one, cfg).angle.to_real() == pytest.approx(-math.pi / 4, abs=1e-4)
        assert cordic_atan(one, Fixed.zero(q16), cfg).angle.to_real() == pytest.approx(math.pi / 2, abs=1e-4)

    def test_atan_degenerate(self, q16, caplog):
        with caplog.at_level(logging.WARNING, logger="utils.numerics"):
            result = cordic_atan(Fixed.zero(q16), Fixed.zero(q16), CordicConfig(16, q16))
        assert result.degenerate
        assert result.angle.raw == 0
        assert any(r.levelno == logging.WARNING and "degenerate" in r.getMessage() for r in caplog.records)

    @pytest.mark.parametrize("x", [0.25, 1.0, 7.5])
    def test_atan_is_monotone_in_y(self, q16, x):
        cfg = CordicConfig(16, q16)
        fx = Fixed.from_real(x, q16)
        angles = [cordic_atan(Fixed.from_real(y, q16), fx, cfg).angle.raw for y in np.linspace(-50.0, 50.0, 1000)]
        assert all(b >= a for a, b in zip(angles, angles[1:]))

    def test_gain_compensation_seeds_the_rotation(self, q16):
        cfg = CordicConfig(16, q16)
        gain = cfg.gain_compensation
        assert 0.6 < gain.to_real() < 0.61
        assert gain.format.fraction_bits == cfg.work_bits
        _, cos_zero = cordic_sincos(Fixed.zero(q16), cfg)
        assert cos_zero.to_real() == pytest.approx(1.0, abs=q16.ulp)
        # halving the seed halves the rotated vector
        object.__setattr__(cfg, "gain_compensation", Fixed.from_raw(gain.raw // 2, gain.format))
        _, cos_half = cordic_sincos(Fixed.zero(q16), cfg)
        assert cos_half.to_real() == pytest.approx(0.5, abs=2 * q16.ulp)

    def test_sincos_accuracy(self, rng, q16):
        cfg = CordicConfig(16, q16)
        worst = worst_pythagoras = 0.0
        for theta in rng.uniform(-math.pi / 2, math.pi / 2, size=10_000):
            ft = Fixed.from_real(theta, q16)
            s, c = cordic_sincos(ft, cfg)
            tq = ft.to_real()
            worst = max(worst, abs(s.to_real() - math.sin(tq)), abs(c.to_real() - math.cos(tq)))
            worst_pythagoras = max(worst_pythagoras, abs(s.to_real() ** 2 + c.to_real() ** 2 - 1.0))
        assert worst <= cfg.error_bound
        assert worst_pythagoras <= 2.0 ** -(q16.fraction_bits - 2)

    def test_sincos_range(self, q16):
        with pytest.raises(ValueError):
            cordic_sincos(Fixed.from_real(2.0, q16), CordicConfig(16, q16))

    def test_format_mismatch(self, q16):
        cfg = CordicConfig(8, QFormat(8, 8))
        with pytest.raises(ValueError):
            cordic_sincos(Fixed.from_real(0.5, q16), cfg)
        with pytest.raises(ValueError):
            cordic_atan(Fixed.from_real(0.5, q16), Fixed.from_real(0.5, q16), cfg)

    def test_small_inputs_keep_precision(self, q16):
        cfg = CordicConfig(16, q16)
        y, x = Fixed.from_raw(1, q16), Fixed.from_raw(3, q16)
        assert cordic_atan(y, x, cfg).angle.to_real() == pytest.approx(math.atan(1 / 3), abs=2 * q16.ulp)
