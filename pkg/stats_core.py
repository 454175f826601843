"""
Error metrics and descriptive statistics shared by every analysis.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import special

from config import VARIABLES

logger = logging.getLogger(__name__)


class AnalysisError(ValueError):
    """An analysis precondition does not hold for the data it was given."""


@dataclass(eq=False)
class ErrorVector:
    crop: str
    years: np.ndarray
    errors: np.ndarray

    def __len__(self):
        return len(self.errors)


@dataclass
class DescriptiveStats:
    min: float
    mean: float
    max: float
    cv: float


@dataclass
class CorrelationResult:
    r: float
    p_value: float
    n: int

    def significant(self, alpha: float) -> bool:
        return bool(np.isfinite(self.p_value) and self.p_value < alpha)


def estimation_error(predicted, actual, years: Optional[Sequence[int]] = None, crop: str = "") -> ErrorVector:
    """Signed error predicted - actual (positive means overestimation).

    Accepts year-indexed pandas Series (indexes must match) or plain sequences
    of equal length together with `years`.
    """
    if isinstance(predicted, pd.Series) and isinstance(actual, pd.Series):
        if not predicted.index.equals(actual.index):
            raise AnalysisError("predicted and actual series are not aligned on the same years")
        years = predicted.index.to_numpy()
        predicted = predicted.to_numpy(dtype=float)
        actual = actual.to_numpy(dtype=float)
    else:
        predicted = np.asarray(predicted, dtype=float)
        actual = np.asarray(actual, dtype=float)
        if predicted.shape != actual.shape:
            raise AnalysisError(
                f"predicted and actual have different lengths ({predicted.size} vs {actual.size})"
            )
        years = np.arange(predicted.size) if years is None else np.asarray(years)
        if years.shape != predicted.shape:
            raise AnalysisError("years are not aligned with the predicted series")

    errors = predicted - actual
    if not np.all(np.isfinite(errors)):
        raise AnalysisError(f"non-finite estimation error for crop '{crop}'")
    return ErrorVector(crop=crop, years=np.asarray(years), errors=errors)


def rmse(ev) -> float:
    """Root mean square error with divisor T (number of evaluated years)."""
    errors = ev.errors if isinstance(ev, ErrorVector) else np.asarray(ev, dtype=float)
    if errors.size == 0:
        raise AnalysisError("cannot compute RMSE of an empty error vector")
    return float(np.sqrt(np.mean(errors ** 2)))


def cv_rmse(ev, reference_mean: float) -> float:
    """RMSE normalized by the mean of the actual series, in percent."""
    if not reference_mean > 0:
        raise AnalysisError(f"reference mean must be positive, got {reference_mean}")
    return 100.0 * rmse(ev) / reference_mean


def describe(series) -> DescriptiveStats:
    values = np.asarray(series, dtype=float)
    if values.size == 0:
        raise AnalysisError("cannot describe an empty series")
    mean = float(values.mean())
    if mean <= 0:
        raise AnalysisError(f"series mean must be positive, got {mean}")
    # sample standard deviation; a single value has no spread
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return DescriptiveStats(min=float(values.min()), mean=mean, max=float(values.max()), cv=100.0 * sd / mean)


def describe_panels(panels) -> pd.DataFrame:
    """Min/mean/max/CV of production, area and yield per crop."""
    rows = []
    for panel in sorted(panels, key=lambda p: p.crop):
        for variable in VARIABLES:
            stats = describe(panel.values(variable))
            rows.append({
                "crop": panel.crop,
                "variable": variable,
                "min": stats.min,
                "mean": stats.mean,
                "max": stats.max,
                "cv_percent": stats.cv,
            })
    return pd.DataFrame(rows, columns=["crop", "variable", "min", "mean", "max", "cv_percent"])


def t_two_sided_p(t_stat: float, dof: int) -> float:
    """Two-sided p-value of a Student t statistic via the regularized incomplete beta."""
    if not np.isfinite(t_stat):
        return 0.0
    x = dof / (dof + t_stat ** 2)
    return float(min(1.0, max(0.0, special.betainc(dof / 2.0, 0.5, x))))


def pearson(x, y) -> CorrelationResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise AnalysisError(f"pearson needs equal lengths, got {x.size} and {y.size}")
    n = x.size
    if n < 3:
        raise AnalysisError(f"pearson needs at least 3 pairs, got {n}")

    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0 or syy == 0:
        raise AnalysisError("correlation undefined: zero variance")

    r = float(np.dot(dx, dy) / np.sqrt(sxx * syy))
    r = max(-1.0, min(1.0, r))
    dof = n - 2
    if 1.0 - r * r <= 0:
        return CorrelationResult(r=r, p_value=0.0, n=n)
    t_stat = r * np.sqrt(dof / (1.0 - r * r))
    return CorrelationResult(r=r, p_value=t_two_sided_p(t_stat, dof), n=n)


def relative_errors(ev: ErrorVector, reference_mean: float) -> np.ndarray:
    """Per-year signed errors in percent of the reference mean."""
    if not reference_mean > 0:
        raise AnalysisError(f"reference mean must be positive, got {reference_mean}")
    return 100.0 * ev.errors / reference_mean


def loocv_mean(values) -> np.ndarray:
    """Leave-one-out mean: each entry predicted by the mean of all the others."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise AnalysisError("leave-one-out mean needs at least 2 values")
    return (values.sum() - values) / (n - 1)


def quadratic_to_arithmetic_mean(values) -> float:
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    if mean <= 0:
        raise AnalysisError(f"series mean must be positive, got {mean}")
    return float(np.sqrt(np.mean(values ** 2)) / mean)
