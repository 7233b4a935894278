"""Fused kernels against the array reference, plus rounding edge cases."""

from fractions import Fraction

import numpy as np
import pytest

from doakit import ivarray

pytestmark = pytest.mark.skipif(ivarray._fast is None, reason="numba kernels unavailable")

SPECIAL = np.array(
    [0.0, -0.0, 1.0, -1.0, 5e-324, -5e-324, 2.2250738585072014e-308, 1e-200, 1e200,
     1.7976931348623157e308, -1.7976931348623157e308, np.inf, -np.inf, 0.1, 3.0, 1e-170]
)


def _edge_samples(rng, n):
    pick = rng.random(n) < 0.3
    vals = np.where(pick, rng.choice(SPECIAL, n), rng.standard_normal(n) * 10.0 ** rng.integers(-300, 300, n))
    return vals


def _interval_samples(rng, n):
    a, b = _edge_samples(rng, n), _edge_samples(rng, n)
    return np.minimum(a, b), np.maximum(a, b)


def _same(x, y):
    return np.array_equal(x.view(np.int64), y.view(np.int64)) or np.array_equal(x, y, equal_nan=True)


def test_add_matches_reference(rng):
    alo, ahi = _interval_samples(rng, 20000)
    blo, bhi = _interval_samples(rng, 20000)
    fast = ivarray.add(alo, ahi, blo, bhi)
    ref = ivarray.add_reference(alo, ahi, blo, bhi)
    assert _same(fast[0], ref[0]) and _same(fast[1], ref[1])


def test_mul_matches_reference(rng):
    alo, ahi = _interval_samples(rng, 20000)
    blo, bhi = _interval_samples(rng, 20000)
    fast = ivarray.mul(alo, ahi, blo, bhi)
    ref = ivarray.mul_reference(alo, ahi, blo, bhi)
    assert np.array_equal(fast[0], ref[0], equal_nan=True)
    assert np.array_equal(fast[1], ref[1], equal_nan=True)


@pytest.mark.parametrize("k", [2, 3, 4, 7])
def test_pow_matches_reference(rng, k):
    v = np.abs(_edge_samples(rng, 5000))
    fast = ivarray._pow_mag(v, k)
    ref = ivarray.pow_magnitude_reference(v, k)
    assert np.array_equal(fast[0], ref[0]) and np.array_equal(fast[1], ref[1])


def test_exact_sum_is_not_widened():
    lo, hi = ivarray.add(1.0, 2.0, 3.0, 4.0)
    assert lo == 4.0 and hi == 6.0


def test_inexact_product_brackets_exact_value():
    lo, hi = ivarray.mul(0.1, 0.1, 0.1, 0.1)
    exact = Fraction(0.1) ** 2
    assert Fraction(float(lo)) <= exact <= Fraction(float(hi))
    assert hi == np.nextafter(lo, np.inf)


def test_overflow_goes_to_infinity():
    lo, hi = ivarray.add(1e308, 1e308, 1e308, 1e308)
    assert np.isfinite(lo) and hi == np.inf


def test_underflowing_product_is_widened_around_zero():
    lo, hi = ivarray.mul(1e-200, 1e-200, 1e-200, 1e-200)
    ref = ivarray.mul_reference(1e-200, 1e-200, 1e-200, 1e-200)
    assert lo < 0.0 < hi
    assert (lo, hi) == (ref[0], ref[1])


def test_nudge_edges():
    assert ivarray.nudge_up(0.0) == 5e-324
    assert ivarray.nudge_down(0.0) == -5e-324
    assert ivarray.nudge_up(np.inf) == np.inf
    assert ivarray.nudge_down(-np.inf) == -np.inf
    assert ivarray.nudge_up(1.0, 2) == np.nextafter(np.nextafter(1.0, 2), 2)


def test_zero_times_infinity_is_zero():
    lo, hi = ivarray.mul(0.0, 0.0, -np.inf, np.inf)
    assert lo == 0.0 and hi == 0.0


def test_broadcasting_shapes():
    lo, hi = ivarray.add(np.zeros((3, 2)), np.ones((3, 2)), 1.0, 1.0)
    assert lo.shape == (3, 2) and np.all(hi == 2.0)
