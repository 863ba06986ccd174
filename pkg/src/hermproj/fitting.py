"""Log-log least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


class DegenerateFitError(ValueError):
    pass


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    ci: tuple[float, float]
    n: int


def fit_loglog(x, y, min_points: int = 2) -> SlopeFit:
    """OLS of log y on log x with a 95% confidence interval for the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < min_points:
        raise DegenerateFitError(f"need at least {min_points} points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateFitError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) < 1e-12:
        raise DegenerateFitError("no spread in the regressor")
    A = np.stack([lx, np.ones_like(lx)], 1)
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1 - float(np.sum(resid ** 2)) / ss_tot
    n = x.size
    if n > 2:
        s2 = float(np.sum(resid ** 2)) / (n - 2)
        se = np.sqrt(s2 / np.sum((lx - lx.mean()) ** 2))
        half = float(stats.t.ppf(0.975, n - 2) * se)
    else:
        half = 0.0
    return SlopeFit(float(slope), float(icpt), r2, (float(slope) - half, float(slope) + half), n)
