"""Log-log power-law fits and the ``h^{-1} log(1/h)`` model comparison."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

SLOPE_TOLERANCE = 0.15
STDERR_LIMIT = 0.05


@dataclass(frozen=True)
class ScalingFit:
    """``log(value) = intercept + slope * log(1/h)``, i.e. ``value ~ e^intercept h^-slope``."""

    slope: float
    intercept: float
    stderr_slope: float
    rss: float
    n_points: int

    def verifies(self, expected: float, tol: float = SLOPE_TOLERANCE,
                 max_stderr: float = STDERR_LIMIT) -> bool:
        return abs(self.slope - expected) <= tol and self.stderr_slope <= max_stderr

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ModelComparison:
    rss_pure_power: float
    rss_log_corrected: float
    preferred: str
    pure_fit: ScalingFit
    log_constant: float

    def to_dict(self):
        d = asdict(self)
        d["pure_fit"] = self.pure_fit.to_dict()
        return d


def _validate(points):
    pts = [(float(h), float(v)) for h, v in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points for a scaling fit")
    for h, v in pts:
        if not h > 0:
            raise ValueError(f"nonpositive h in point ({h}, {v})")
        if not v > 0:
            raise ValueError(f"nonpositive value in point ({h}, {v})")
    hs = [h for h, _ in pts]
    if len(set(hs)) != len(hs):
        raise ValueError("h values must be distinct")
    return np.array(hs), np.array([v for _, v in pts])


def fit_power_law(points) -> ScalingFit:
    """Ordinary least squares of ``log(value)`` on ``log(1/h)``."""
    h, v = _validate(points)
    X = np.log(1.0 / h)
    y = np.log(v)
    n = len(X)
    xm = X.mean()
    sxx = float(np.sum((X - xm) ** 2))
    slope = float(np.sum((X - xm) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xm)
    resid = y - (intercept + slope * X)
    rss = float(np.sum(resid**2))
    stderr = math.sqrt(rss / (n - 2) / sxx) if n > 2 else 0.0
    return ScalingFit(slope, intercept, stderr, rss, n)


def h_exponent(points) -> ScalingFit:
    """Fit with the sign convention ``value ~ h^slope`` (decay exponents)."""
    f = fit_power_law(points)
    return ScalingFit(-f.slope, f.intercept, f.stderr_slope, f.rss, f.n_points)


def compare_log_correction(points) -> ModelComparison:
    """Pinned ``C h^{-1} log(1/h)`` (one parameter) against free ``C h^{-s}``.

    Both residual sums are taken on ``log(value)``; ties go to the pure law.
    """
    h, v = _validate(points)
    if np.any(h >= 1.0):
        raise ValueError("log-corrected model needs h < 1 so that log(1/h) > 0")
    pure = fit_power_law(points)
    y = np.log(v)
    basis = np.log(np.log(1.0 / h) / h)
    logC = float(np.mean(y - basis))
    rss_log = float(np.sum((y - logC - basis) ** 2))
    preferred = "log_corrected" if rss_log < pure.rss else "pure"
    return ModelComparison(pure.rss, rss_log, preferred, pure, math.exp(logC))
