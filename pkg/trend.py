"""
Linear and exponential trends fitted by OLS against the calendar year.

The time regressor is t = year - year0 where year0 is the first year of the
series being analysed; beta does not depend on that shift, alpha is reported
in the shifted frame.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from config import SIGNIFICANCE_LEVEL, VARIABLES
from stats_core import AnalysisError, t_two_sided_p

logger = logging.getLogger(__name__)

NONE = "none"
LINEAR = "linear"
EXPONENTIAL = "exponential"


@dataclass
class TrendModel:
    kind: str
    alpha: float = 0.0
    beta: float = 0.0
    p_value: float = 1.0
    r2: float = 0.0
    year0: int = 0

    def significant(self, alpha: float = SIGNIFICANCE_LEVEL) -> bool:
        return self.kind != NONE and self.p_value < alpha


@dataclass(eq=False)
class DetrendedSeries:
    years: np.ndarray
    values: np.ndarray
    trend_values: np.ndarray


def _ols(t: np.ndarray, u: np.ndarray):
    """Slope, intercept, two-sided slope p-value and R² of u = a + b t."""
    n = u.size
    t_bar = t.mean()
    u_bar = u.mean()
    stt = float(np.sum((t - t_bar) ** 2))
    if stt == 0:
        raise AnalysisError("zero variance in the time regressor")
    if np.ptp(u) == 0:
        # constant series: nothing to explain, no trend
        return float(u[0]), 0.0, 1.0, 0.0

    beta = float(np.sum((t - t_bar) * (u - u_bar)) / stt)
    alpha = float(u_bar - beta * t_bar)
    residuals = u - (alpha + beta * t)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((u - u_bar) ** 2))
    r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    if ss_res == 0:
        return alpha, beta, 0.0, r2

    se_beta = np.sqrt(ss_res / (n - 2) / stt)
    p_value = t_two_sided_p(beta / se_beta, n - 2)
    return alpha, beta, p_value, r2


def _prepare(series, years, year0: Optional[int]):
    values = np.asarray(series, dtype=float)
    if years is None:
        if isinstance(series, pd.Series):
            years = series.index.to_numpy()
        else:
            raise AnalysisError("years are required for trend fitting")
    years = np.asarray(years, dtype=float)
    if values.size < 3:
        raise AnalysisError(f"length ≥ 3 required for trend fitting, got {values.size}")
    if years.shape != values.shape:
        raise AnalysisError("years and values are not aligned")
    year0 = int(years[0]) if year0 is None else int(year0)
    return values, years - year0, year0


def fit_linear(series, years=None, year0: Optional[int] = None) -> TrendModel:
    values, t, year0 = _prepare(series, years, year0)
    alpha, beta, p_value, r2 = _ols(t, values)
    return TrendModel(kind=LINEAR, alpha=alpha, beta=beta, p_value=p_value, r2=r2, year0=year0)


def fit_exponential(series, years=None, year0: Optional[int] = None) -> TrendModel:
    """OLS on log values; R² is reported in log space."""
    values, t, year0 = _prepare(series, years, year0)
    if np.any(values <= 0):
        raise AnalysisError("exponential model ineligible: series has non-positive values")
    alpha, beta, p_value, r2 = _ols(t, np.log(values))
    return TrendModel(kind=EXPONENTIAL, alpha=alpha, beta=beta, p_value=p_value, r2=r2, year0=year0)


def fit_kind(kind: str, series, years=None, year0: Optional[int] = None) -> TrendModel:
    if kind == LINEAR:
        return fit_linear(series, years, year0)
    if kind == EXPONENTIAL:
        return fit_exponential(series, years, year0)
    raise AnalysisError(f"cannot fit trend kind '{kind}'")


def candidate_fits(series, years=None, year0: Optional[int] = None) -> List[TrendModel]:
    fits = [fit_linear(series, years, year0)]
    if np.all(np.asarray(series, dtype=float) > 0):
        fits.append(fit_exponential(series, years, year0))
    return fits


def select_trend(series, years=None, alpha: float = SIGNIFICANCE_LEVEL, year0: Optional[int] = None) -> TrendModel:
    """Keep significant models; if both qualify the higher R² (each in its own space) wins."""
    fits = candidate_fits(series, years, year0)
    significant = [m for m in fits if m.p_value < alpha]
    if not significant:
        return TrendModel(kind=NONE, year0=fits[0].year0)
    # stable on ties: linear comes first
    return max(significant, key=lambda m: m.r2)


def trend_value(model: TrendModel, year):
    if model.kind == NONE:
        raise AnalysisError("no trend to evaluate (kind=none)")
    t = np.asarray(year, dtype=float) - model.year0
    level = model.alpha + model.beta * t
    if model.kind == EXPONENTIAL:
        level = np.exp(level)
    return float(level) if np.ndim(level) == 0 else level


def detrend(series, years, model: TrendModel) -> DetrendedSeries:
    if model.kind == NONE:
        raise AnalysisError("cannot detrend with kind=none; skip detrending instead")
    values = np.asarray(series, dtype=float)
    years = np.asarray(years)
    trend_values = np.asarray(trend_value(model, years), dtype=float)
    return DetrendedSeries(years=years, values=values - trend_values, trend_values=trend_values)


def trend_table(panels, alpha: float = SIGNIFICANCE_LEVEL) -> pd.DataFrame:
    """One row per (crop, variable): best-R² fit, its slope and fit quality, and the selected kind."""
    rows = []
    for panel in sorted(panels, key=lambda p: p.crop):
        for variable in VARIABLES:
            values = panel.values(variable)
            fits = candidate_fits(values, panel.years)
            best = max(fits, key=lambda m: m.r2)
            selected = select_trend(values, panel.years, alpha=alpha)
            rows.append({
                "crop": panel.crop,
                "variable": variable,
                "model": best.kind,
                "beta": best.beta,
                "r2": best.r2,
                "p_value": best.p_value,
                "significant": best.p_value < alpha,
                "selected": selected.kind,
            })
    return pd.DataFrame(rows, columns=["crop", "variable", "model", "beta", "r2", "p_value", "significant", "selected"])
