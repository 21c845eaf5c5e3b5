import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsdlab import numerics


def test_log1mexp_matches_naive():
    xs = np.array([-50.0, -5.0, -1.0, -0.5, -0.1, -1e-3, -1e-8])
    assert np.allclose(numerics.log1mexp(xs), np.log(1.0 - np.exp(xs)), rtol=1e-12)


def test_log1mexp_extremes():
    # deep negative: log(1 - e^x) ~ -e^x
    assert numerics.log1mexp(-800.0) == pytest.approx(0.0, abs=1e-300)
    # tiny |x|: log(1 - e^x) ~ log(-x)
    assert numerics.log1mexp(-1e-200) == pytest.approx(np.log(1e-200), rel=1e-12)


def test_log_sinh():
    zs = np.array([1e-8, 1e-5, 0.1, 1.0, 10.0, 100.0])
    assert np.allclose(numerics.log_sinh(zs), np.log(np.sinh(zs)), rtol=1e-10)
    # no overflow far beyond the sinh range
    assert numerics.log_sinh(5000.0) == pytest.approx(5000.0 - np.log(2.0), rel=1e-12)
    assert numerics.log_sinh(0.0) == -np.inf


def test_sinhc():
    assert numerics.sinhc(0.0) == 1.0
    assert numerics.sinhc(1e-9) == pytest.approx(1.0, abs=1e-15)
    assert numerics.sinhc(2.0) == pytest.approx(np.sinh(2.0) / 2.0, rel=1e-14)
    assert np.isfinite(numerics.sinhc(1e6))  # clamped, callers multiply by ~0


def test_panel_quadrature_gaussian():
    # integral of e^{-x^2/2} over [0, 10] = sqrt(pi/2) to full precision
    lv, rel = numerics.refine_log_integral(lambda x: -0.5 * x * x, 0.0, 10.0)
    assert np.exp(lv) == pytest.approx(np.sqrt(np.pi / 2.0), rel=1e-13)
    assert rel < 1e-9


def test_panel_quadrature_empty_and_flat():
    lv, rel = numerics.refine_log_integral(lambda x: np.zeros_like(x), 2.0, 2.0)
    assert lv == -np.inf
    lv, _ = numerics.refine_log_integral(lambda x: np.zeros_like(x), 0.0, 3.0)
    assert np.exp(lv) == pytest.approx(3.0, rel=1e-12)


def test_log_trapezoid_cumulative():
    x = np.linspace(0.0, 5.0, 20001)
    cum = numerics.log_trapezoid_cumulative(-x, x)
    # integral of e^{-s} over [0, x] = 1 - e^{-x}
    assert cum[0] == -np.inf
    assert np.exp(cum[-1]) == pytest.approx(1.0 - np.exp(-5.0), rel=1e-8)


def test_support_bracket():
    grid = np.linspace(0.0, 10.0, 101)
    vals = -0.5 * (grid - 4.0) ** 2
    lo, hi = numerics.support_bracket(vals, grid, drop=8.0)
    assert lo <= 0.0 or lo < 4.0 - np.sqrt(16.0)
    assert lo < 4.0 < hi
    assert numerics.support_bracket(np.full(5, -np.inf), grid[:5]) is None


@given(st.floats(0.1, 5.0), st.floats(0.5, 8.0))
@settings(max_examples=30, deadline=None)
def test_refine_matches_exponential(rate, b):
    # integral of e^{-rate x} over [0, b]
    lv, _ = numerics.refine_log_integral(lambda x: -rate * x, 0.0, b)
    exact = (1.0 - np.exp(-rate * b)) / rate
    assert np.exp(lv) == pytest.approx(exact, rel=1e-10)


@given(st.lists(st.floats(-30.0, 0.0), min_size=3, max_size=40))
@settings(max_examples=50, deadline=None)
def test_support_bracket_contains_peak(logvals):
    grid = np.arange(len(logvals), dtype=float)
    vals = np.asarray(logvals)
    lo, hi = numerics.support_bracket(vals, grid, drop=5.0)
    assert lo <= grid[np.argmax(vals)] <= hi
