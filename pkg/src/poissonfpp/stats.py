"""Small estimators used by the experiment reports."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "FitResult",
    "TrendResult",
    "loglog_fit",
    "mean_se",
    "jackknife_var",
    "median_se",
    "weighted_trend",
]


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    stderr: float
    r_squared: float
    ci_low: float = math.nan
    ci_high: float = math.nan

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "r_squared": self.r_squared,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


@dataclass(frozen=True)
class TrendResult:
    slope: float
    stderr: float

    @property
    def z(self) -> float:
        if self.stderr > 0:
            return self.slope / self.stderr
        return 0.0 if self.slope == 0 else math.copysign(math.inf, self.slope)

    def as_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "z": self.z}


def loglog_fit(t, stat, level: float = 0.95) -> FitResult:
    """Least squares of log(stat) on log(t); CI from the t distribution with n - 2 dof."""
    x = np.log(np.asarray(t, dtype=float))
    y = np.log(np.asarray(stat, dtype=float))
    if len(x) < 2 or not np.all(np.isfinite(y)):
        return FitResult(math.nan, math.nan, math.nan, math.nan)
    res = stats.linregress(x, y)
    se = float(res.stderr) if len(x) > 2 else math.nan
    half = float(stats.t.ppf(0.5 + level / 2, len(x) - 2)) * se if len(x) > 2 else math.nan
    slope = float(res.slope)
    return FitResult(slope, float(res.intercept), se, float(res.rvalue**2), slope - half, slope + half)


def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return math.nan, math.nan
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else math.nan
    return float(x.mean()), se


def jackknife_var(x) -> tuple[float, float]:
    """Unbiased sample variance and its leave-one-out jackknife standard error."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 3:
        return (float(x.var(ddof=1)) if n == 2 else math.nan), math.nan
    v = float(x.var(ddof=1))
    s1, s2 = x.sum(), (x * x).sum()
    m = (s1 - x) / (n - 1)
    loo = ((s2 - x * x) - (n - 1) * m * m) / (n - 2)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return v, se


def median_se(x, seed: int, n_boot: int = 400) -> tuple[float, float]:
    """Sample median with a seeded bootstrap standard error."""
    x = np.asarray(x, dtype=float)
    if len(x) == 0:
        return math.nan, math.nan
    med = float(np.median(x))
    if len(x) < 2:
        return med, math.nan
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    idx = rng.integers(0, len(x), size=(n_boot, len(x)))
    return med, float(np.median(x[idx], axis=1).std(ddof=1))


def weighted_trend(x, y, se) -> TrendResult:
    """Weighted least-squares slope of y on x with weights 1/se^2.

    Entries with zero or missing standard error fall back to equal weights,
    in which case the residual scatter sets the slope error.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    se = np.asarray(se, dtype=float)
    if len(x) < 2:
        return TrendResult(math.nan, math.nan)
    if np.all(np.isfinite(se)) and np.all(se > 0):
        w = 1.0 / se**2
        xm = np.sum(w * x) / w.sum()
        ym = np.sum(w * y) / w.sum()
        sxx = np.sum(w * (x - xm) ** 2)
        return TrendResult(float(np.sum(w * (x - xm) * (y - ym)) / sxx), float(math.sqrt(1.0 / sxx)))
    res = stats.linregress(x, y)
    return TrendResult(float(res.slope), float(res.stderr) if len(x) > 2 else math.nan)
