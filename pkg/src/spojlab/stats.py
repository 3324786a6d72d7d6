"""Small statistical toolkit used by the behavioral models.

Everything here is pure Python on lists of floats; the cohorts this package
handles are a few hundred students and a few thousand logs, so there is no
need for array libraries.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    ConstantInput,
    DegenerateX,
    EmptyInput,
    LengthMismatch,
    SampleTooSmall,
    TooFewPoints,
    ZeroBaseline,
    ZeroVariance,
)

Z_TEST_MIN_N = 30

# smallest positive double; keeps p-values inside (0, 1] after erfc underflow
_P_FLOOR = sys.float_info.min * sys.float_info.epsilon


@dataclass(frozen=True)
class OlsFit:
    slope: float
    intercept: float
    r2: float
    n: int


@dataclass(frozen=True)
class ZTestResult:
    n: int
    mean: float
    stddev: float
    z: float
    p: float


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def ols(points: Iterable[tuple[float, float]]) -> OlsFit:
    """Least-squares line through ``points``.

    Raises TooFewPoints for fewer than two points and DegenerateX when every
    x is identical. A constant y gives slope 0 and r2 1 (perfect fit).
    """
    pts = [(float(x), float(y)) for x, y in points]
    n = len(pts)
    if n < 2:
        raise TooFewPoints(f"ols needs at least 2 points, got {n}")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    if len(set(xs)) < 2:
        raise DegenerateX("ols needs at least two distinct x values")

    x_bar = _mean(xs)
    if len(set(ys)) == 1:
        return OlsFit(slope=0.0, intercept=ys[0], r2=1.0, n=n)
    y_bar = _mean(ys)
    dx = [x - x_bar for x in xs]
    dy = [y - y_bar for y in ys]
    sxx = math.fsum(d * d for d in dx)
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    slope = sxy / sxx
    intercept = y_bar - slope * x_bar

    ss_tot = math.fsum(d * d for d in dy)
    ss_res = math.fsum((y - (intercept + slope * x)) ** 2 for x, y in pts)
    r2 = 1.0 - ss_res / ss_tot
    r2 = min(1.0, max(0.0, r2))
    return OlsFit(slope=slope, intercept=intercept, r2=r2, n=n)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise LengthMismatch(f"pearson got {len(xs)} xs and {len(ys)} ys")
    n = len(xs)
    if n < 3:
        raise TooFewPoints(f"pearson needs at least 3 pairs, got {n}")
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        raise ConstantInput("pearson is undefined for a constant input")
    x_bar = _mean(xs)
    y_bar = _mean(ys)
    dx = [x - x_bar for x in xs]
    dy = [y - y_bar for y in ys]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    rho = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


def std_normal_cdf(z: float) -> float:
    """Standard normal CDF via erfc, accurate in both tails."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def z_test(samples: Sequence[float], mu0: float, two_sided: bool = True) -> ZTestResult:
    """One-sample large-n z-test of ``mean(samples) == mu0``.

    The sample standard deviation (n - 1 denominator) stands in for the
    unknown population sigma.
    """
    n = len(samples)
    if n < Z_TEST_MIN_N:
        raise SampleTooSmall(f"z-test needs n >= {Z_TEST_MIN_N}, got {n}")
    mean = _mean(samples)
    var = math.fsum((s - mean) ** 2 for s in samples) / (n - 1)
    if var <= 0.0:
        raise ZeroVariance("z-test is undefined for zero sample variance")
    sd = math.sqrt(var)
    z = (mean - mu0) / (sd / math.sqrt(n))
    if two_sided:
        p = math.erfc(abs(z) / math.sqrt(2.0))
    else:
        p = 0.5 * math.erfc(z / math.sqrt(2.0))
    p = min(1.0, max(_P_FLOOR, p))
    return ZTestResult(n=n, mean=mean, stddev=sd, z=z, p=p)


def yoy_change(prev: float, curr: float) -> float:
    """Percent change from ``prev`` to ``curr``."""
    if prev <= 0:
        raise ZeroBaseline("year-on-year change needs a positive baseline")
    return 100.0 * (curr - prev) / prev


def format_yoy(percent: float) -> str:
    """'-19%' style rendering, integer precision, signed with a true minus."""
    rounded = int(round(percent))
    if rounded < 0:
        return f"−{-rounded}%"
    if rounded > 0:
        return f"+{rounded}%"
    return "0%"


def percentile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile with inclusive endpoints."""
    if not values:
        raise EmptyInput("percentile of an empty sequence")
    if not 0.0 <= q <= 100.0:
        raise ValueError(f"q must be in [0, 100], got {q}")
    ordered = sorted(values)
    pos = (len(ordered) - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, len(ordered) - 1)
    frac = pos - lo
    return ordered[lo] + (ordered[hi] - ordered[lo]) * frac


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Rank correlation (average ranks for ties)."""
    return pearson(_ranks(xs), _ranks(ys))


def _ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks
