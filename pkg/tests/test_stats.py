import math
import random

import mpmath
import numpy as np
import pytest

from spojlab import stats
from spojlab.errors import (
    ConstantInput,
    DegenerateX,
    EmptyInput,
    LengthMismatch,
    SampleTooSmall,
    TooFewPoints,
    ZeroBaseline,
    ZeroVariance,
)


def test_ols_exact_line():
    fit = stats.ols([(1, 5), (2, 7), (3, 9), (4, 11)])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.intercept == pytest.approx(3.0, abs=1e-12)
    assert fit.r2 == 1.0
    assert fit.n == 4


def test_ols_matches_numpy_polyfit():
    rng = random.Random(11)
    for _ in range(50):
        n = rng.randint(2, 40)
        xs = [rng.uniform(-10, 10) for _ in range(n)]
        ys = [3 * x + rng.gauss(0, 2) for x in xs]
        fit = stats.ols(zip(xs, ys))
        slope, intercept = np.polyfit(xs, ys, 1)
        assert fit.slope == pytest.approx(slope, abs=1e-9)
        assert fit.intercept == pytest.approx(intercept, abs=1e-9)


def test_ols_constant_y_is_perfect_flat_fit():
    fit = stats.ols([(1, 4), (2, 4), (3, 4)])
    assert (fit.slope, fit.intercept, fit.r2) == (0.0, 4.0, 1.0)


def test_ols_errors():
    with pytest.raises(TooFewPoints):
        stats.ols([(1, 2)])
    with pytest.raises(DegenerateX):
        stats.ols([(1, 2), (1, 3), (1, 4)])


def test_pearson_matches_numpy():
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(3, 60)
        xs = [rng.gauss(0, 1) for _ in range(n)]
        ys = [x * rng.uniform(-2, 2) + rng.gauss(0, 1) for x in xs]
        assert stats.pearson(xs, ys) == pytest.approx(np.corrcoef(xs, ys)[0, 1], abs=1e-12)


def test_pearson_perfect_and_clamped():
    assert stats.pearson([1, 2, 3], [2, 4, 6]) == 1.0
    assert stats.pearson([1, 2, 3], [3, 2, 1]) == -1.0


def test_pearson_errors():
    with pytest.raises(LengthMismatch):
        stats.pearson([1, 2, 3], [1, 2])
    with pytest.raises(TooFewPoints):
        stats.pearson([1, 2], [1, 2])
    with pytest.raises(ConstantInput):
        stats.pearson([1, 1, 1], [1, 2, 3])


@pytest.mark.parametrize("z", [-8.0, -3.5, -1.96, -0.5, 0.0, 0.25, 1.0, 1.96, 4.0, 8.0])
def test_std_normal_cdf_against_mpmath(z):
    mpmath.mp.dps = 40
    assert stats.std_normal_cdf(z) == pytest.approx(float(mpmath.ncdf(z)), abs=1e-15)


def test_std_normal_cdf_deep_tail_keeps_relative_precision():
    mpmath.mp.dps = 40
    assert stats.std_normal_cdf(-30.0) == pytest.approx(float(mpmath.ncdf(-30)), rel=1e-12)


def test_z_test_known_value():
    # 36 samples, mean 10.5, sd 1.5 about mu0 = 10: z = 0.5 / (1.5 / 6) = 2
    samples = [9.0, 12.0] * 18
    res = stats.z_test(samples, 10.0)
    sd = float(np.std(samples, ddof=1))
    z = 0.5 / (sd / 6)
    assert res.z == pytest.approx(z, abs=1e-12)
    assert res.p == pytest.approx(2 * (1 - float(mpmath.ncdf(abs(z)))), abs=1e-12)


def test_z_test_one_sided():
    samples = [9.0, 12.0] * 18
    two = stats.z_test(samples, 10.0)
    one = stats.z_test(samples, 10.0, two_sided=False)
    assert one.p == pytest.approx(two.p / 2, abs=1e-15)


def test_z_test_p_stays_positive_for_huge_z():
    res = stats.z_test([1000.0 + (i % 2) * 1e-3 for i in range(100)], 0.0)
    assert 0.0 < res.p <= 1.0


def test_z_test_errors():
    with pytest.raises(SampleTooSmall):
        stats.z_test([1.0] * 29, 0.0)
    with pytest.raises(ZeroVariance):
        stats.z_test([2.0] * 30, 0.0)


def test_yoy_and_format():
    assert stats.yoy_change(100, 81) == pytest.approx(-19.0)
    assert stats.format_yoy(-19.04) == "−19%"
    assert stats.format_yoy(12.6) == "+13%"
    assert stats.format_yoy(0.2) == "0%"
    with pytest.raises(ZeroBaseline):
        stats.yoy_change(0, 5)


def test_yoy_shrinking_cohort():
    assert stats.yoy_change(8493, 2609) == pytest.approx(-69.2806, abs=1e-4)


def test_percentile_matches_numpy_linear():
    rng = random.Random(2)
    for _ in range(30):
        values = [rng.uniform(0, 100) for _ in range(rng.randint(1, 30))]
        q = rng.uniform(0, 100)
        assert stats.percentile(values, q) == pytest.approx(float(np.percentile(values, q)), abs=1e-9)
    with pytest.raises(EmptyInput):
        stats.percentile([], 50)
    with pytest.raises(ValueError):
        stats.percentile([1], 101)


def test_spearman_with_ties_matches_brute_force():
    xs = [1, 2, 2, 3, 5, 5, 5, 9]
    ys = [2, 1, 4, 3, 6, 8, 7, 9]

    def ranks(v):
        return [sum(1 for w in v if w < x) + (sum(1 for w in v if w == x) + 1) / 2 for x in v]

    expected = np.corrcoef(ranks(xs), ranks(ys))[0, 1]
    assert stats.spearman(xs, ys) == pytest.approx(expected, abs=1e-12)
    assert math.isclose(stats.spearman([1, 2, 3, 4], [10, 20, 30, 40]), 1.0)
