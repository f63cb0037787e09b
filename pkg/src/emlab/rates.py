"""Least-squares convergence rates on log-log data."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["RateFit", "FitError", "PLAIN", "LOG_CORRECTED", "fit_rate", "fit_points", "summary_line"]

PLAIN = "plain"
LOG_CORRECTED = "log_corrected"


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    levels: tuple
    variant: str
    weighted: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["levels"] = list(self.levels)
        return d


def _abscissa(levels: np.ndarray, variant: str) -> np.ndarray:
    if variant == PLAIN:
        return np.log(levels)
    if variant == LOG_CORRECTED:
        return np.log(np.log(levels + 1.0) / levels)
    raise FitError(f"unknown variant {variant!r}")


def fit_points(levels, values, variant: str = PLAIN, ci=None, weighted: bool = False) -> RateFit:
    """OLS (or 1/ci^2-weighted) fit of ``log value`` against the chosen abscissa.

    ``plain`` regresses on ``log n``; ``log_corrected`` on
    ``log(log(n + 1) / n)``, so that ``v = C n^-1 log(n+1)`` has slope 1.
    """
    n = np.asarray(levels, dtype=float)
    v = np.asarray(values, dtype=float)
    if n.shape != v.shape:
        raise FitError("levels and values differ in length")
    if n.size < 3:
        raise FitError(f"need at least 3 levels to fit, got {n.size}")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise FitError("all fitted values must be finite and strictly positive")
    x = _abscissa(n, variant)
    y = np.log(v)
    if weighted:
        if ci is None:
            raise FitError("weighted fit needs confidence half-widths")
        # delta method: sd(log v) ~ ci / v
        sd = np.asarray(ci, dtype=float) / v
        if np.any(sd <= 0) or np.any(~np.isfinite(sd)):
            raise FitError("weights need positive finite confidence half-widths")
        w = 1.0 / sd**2
    else:
        w = np.ones_like(x)
    xm = np.sum(w * x) / np.sum(w)
    ym = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    ss_res = np.sum(w * resid**2)
    ss_tot = np.sum(w * (y - ym) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = n.size - 2
    se = float(np.sqrt(ss_res / dof / sxx)) if dof > 0 else float("inf")
    return RateFit(float(slope), float(intercept), se, float(r2), tuple(int(k) for k in n), variant, weighted)


def fit_rate(curve, variant: str = PLAIN, include_smallest: bool = False, weighted: bool = False,
             values_attr: str | None = None) -> RateFit:
    """Fit an :class:`ErrorCurve` or :class:`ScalingReport`.

    The smallest level is dropped unless ``include_smallest`` (pre-asymptotic
    transient); zero values are not allowed in the fit set.
    """
    levels = list(curve.levels)
    values = list(getattr(curve, values_attr or curve.fit_values_attr))
    ci = list(curve.ci_half_width)
    if not include_smallest:
        levels, values, ci = levels[1:], values[1:], ci[1:]
    return fit_points(levels, values, variant, ci=ci, weighted=weighted)


def summary_line(label: str, fit: RateFit) -> str:
    return (f"{label}: slope {fit.slope:+.3f} +- {fit.slope_stderr:.3f} (R^2 {fit.r_squared:.4f}, "
            f"{fit.variant}, n = {fit.levels[0]}..{fit.levels[-1]})")
