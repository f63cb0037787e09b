import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emlab.coupled_error import ErrorCurve
from emlab.rates import LOG_CORRECTED, PLAIN, FitError, fit_points, fit_rate, summary_line

LEVELS = [16, 32, 64, 128, 256, 512, 1024]


def test_exact_power_law():
    v = [3.0 * n**-1.25 for n in LEVELS]
    fit = fit_points(LEVELS, v)
    assert fit.slope == pytest.approx(-1.25, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.slope_stderr < 1e-12


def test_log_corrected_abscissa():
    v = [0.7 * np.log(n + 1) / n for n in LEVELS]
    assert fit_points(LEVELS, v, LOG_CORRECTED).slope == pytest.approx(1.0, abs=1e-12)
    # d log(log(n+1)/n) / d log n is about -1 + 1/log n, between -0.86 and -0.64 here
    assert -0.86 < fit_points(LEVELS, v, PLAIN).slope < -0.7


@given(st.floats(1e-6, 1e6), st.floats(-3.0, 0.5))
@settings(max_examples=50, deadline=None)
def test_slope_invariant_under_value_scaling(c, p):
    base = np.array([n**p * (1 + 0.1 * np.sin(n)) for n in LEVELS])
    a = fit_points(LEVELS, base)
    b = fit_points(LEVELS, c * base)
    assert b.slope == pytest.approx(a.slope, abs=1e-9)
    assert b.intercept == pytest.approx(a.intercept + np.log(c), abs=1e-8)


def test_weighted_fit_reduces_to_ols_with_equal_relative_ci():
    v = np.array([n**-1.0 * (1 + 0.05 * (-1) ** n) for n in range(16, 23)], dtype=float)
    lv = list(range(16, 23))
    a = fit_points(lv, v)
    b = fit_points(lv, v, ci=0.1 * v, weighted=True)
    assert b.slope == pytest.approx(a.slope, abs=1e-12)
    assert b.weighted


def test_errors():
    with pytest.raises(FitError):
        fit_points([16, 32], [1.0, 0.5])
    with pytest.raises(FitError):
        fit_points([16, 32, 64], [1.0, 0.0, 0.5])
    with pytest.raises(FitError):
        fit_points([16, 32, 64], [1.0, 0.5, 0.2], variant="cubic")
    with pytest.raises(FitError):
        fit_points([16, 32, 64], [1.0, 0.5, 0.2], weighted=True)


def test_fit_rate_drops_smallest_level():
    curve = ErrorCurve("sign", 1, 1.0, None, LEVELS, [100.0] + [n**-1.0 for n in LEVELS[1:]], [0.0] * 7,
                       1000, 16384, 0, "fine_em", [0.0, 1.0])
    assert fit_rate(curve).slope == pytest.approx(-1.0)
    assert fit_rate(curve).levels == tuple(LEVELS[1:])
    assert fit_rate(curve, include_smallest=True).slope < -1.5
    assert "slope -1.000" in summary_line("sign", fit_rate(curve))


def test_dropping_largest_level_is_stable_on_clean_data():
    rng = np.random.default_rng(1)
    v = np.array([n**-1.0 for n in LEVELS]) * np.exp(0.02 * rng.standard_normal(7))
    full, short = fit_points(LEVELS, v), fit_points(LEVELS[:-1], v[:-1])
    assert abs(full.slope - short.slope) < 3 * max(full.slope_stderr, short.slope_stderr)
