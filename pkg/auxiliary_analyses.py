"""
Department stratification by contribution to national production error, and
correlation between cumulative rainy-season rainfall and crop yield.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from config import (
    MIN_LOOCV_YEARS,
    MIN_RAINFALL_YEARS,
    RAINY_SEASON_FIRST_DECADE,
    RAINY_SEASON_LAST_DECADE,
    SIGNIFICANCE_LEVEL,
    STRATA_CUTOFFS,
)
from data_ingest import CropPanel, DepartmentPanel, RainfallPanel
from stats_core import AnalysisError, CorrelationResult, ErrorVector, estimation_error, loocv_mean, pearson, rmse

logger = logging.getLogger(__name__)

WEIGHTINGS = ["mean", "production"]


@dataclass
class DepartmentScore:
    department: str
    errors: Dict[str, ErrorVector] = field(default_factory=dict)
    scores: Dict[str, float] = field(default_factory=dict)
    mean_production: Dict[str, float] = field(default_factory=dict)

    def mean_score(self) -> float:
        return float(np.mean(list(self.scores.values()))) if self.scores else 0.0

    def weighted_score(self) -> float:
        """Score averaged across crops weighted by the department's mean production."""
        weights = np.array([self.mean_production[c] for c in self.scores], dtype=float)
        if weights.sum() <= 0:
            return self.mean_score()
        values = np.array(list(self.scores.values()), dtype=float)
        return float(np.dot(values, weights) / weights.sum())

    def sort_key(self, weighting: str = "mean") -> float:
        return self.weighted_score() if weighting == "production" else self.mean_score()


@dataclass
class Stratification:
    cutoffs: List[float]
    labels: List[str]
    order: List[str]
    assignment: Dict[str, str]
    sort_keys: Dict[str, float]
    cumulative_errors: Dict[str, Dict[str, float]]
    stratum_errors: Dict[str, Dict[str, float]]

    def sizes(self) -> Dict[str, int]:
        counts = {label: 0 for label in self.labels}
        for label in self.assignment.values():
            counts[label] += 1
        return counts

    def members(self, label: str) -> List[str]:
        return [d for d in self.order if self.assignment[d] == label]

    def table(self) -> pd.DataFrame:
        rows = []
        for department in self.order:
            rows.append({
                "record": "department",
                "stratum": self.assignment[department],
                "department": department,
                "crop": "",
                "score_percent": self.sort_keys[department],
                "cumulative_error_percent": None,
                "stratum_error_percent": None,
            })
        for label in self.labels:
            for crop in sorted(self.cumulative_errors[label]):
                rows.append({
                    "record": "aggregate",
                    "stratum": label,
                    "department": "",
                    "crop": crop,
                    "score_percent": None,
                    "cumulative_error_percent": self.cumulative_errors[label][crop],
                    "stratum_error_percent": self.stratum_errors[label].get(crop, 0.0),
                })
        return pd.DataFrame(rows, columns=["record", "stratum", "department", "crop", "score_percent",
                                           "cumulative_error_percent", "stratum_error_percent"])


@dataclass
class RainfallCorrelation:
    crop: str
    variable: str
    endpoints: List[int]
    correlations: List[CorrelationResult]
    alpha: float = SIGNIFICANCE_LEVEL

    @property
    def r(self) -> List[float]:
        return [c.r for c in self.correlations]

    @property
    def significant(self) -> List[bool]:
        return [c.significant(self.alpha) for c in self.correlations]

    def rows(self) -> List[dict]:
        return [{
            "crop": self.crop,
            "variable": self.variable,
            "endpoint_decade": endpoint,
            "r": c.r,
            "p_value": c.p_value,
            "significant": c.significant(self.alpha),
            "n_years": c.n,
        } for endpoint, c in zip(self.endpoints, self.correlations)]


# --- Departments ---
def _national_series(national: List[CropPanel]) -> Dict[str, pd.Series]:
    return {panel.crop: panel.series("production") for panel in national}


def department_scores(dpanels: List[DepartmentPanel], national: List[CropPanel]) -> List[DepartmentScore]:
    """Leave-one-out mean error of each department series, scored against national production.

    No trend is fitted at department level.
    """
    national_production = _national_series(national)
    scores: Dict[str, DepartmentScore] = {}
    for dpanel in sorted(dpanels, key=lambda d: (d.department, d.crop)):
        if len(dpanel.years) < MIN_LOOCV_YEARS:
            raise AnalysisError(
                f"department {dpanel.department} {dpanel.crop}: at least {MIN_LOOCV_YEARS} years required, "
                f"got {len(dpanel.years)}"
            )
        if dpanel.crop not in national_production:
            raise AnalysisError(f"department {dpanel.department}: crop '{dpanel.crop}' missing from national panel")

        reference = national_production[dpanel.crop].reindex(dpanel.years)
        if reference.isna().any():
            missing = reference.index[reference.isna()].tolist()
            raise AnalysisError(f"national {dpanel.crop} production missing for years {missing}")
        national_mean = float(reference.mean())

        ev = estimation_error(loocv_mean(dpanel.production), dpanel.production, dpanel.years,
                              crop=dpanel.crop)
        score = scores.setdefault(dpanel.department, DepartmentScore(department=dpanel.department))
        score.errors[dpanel.crop] = ev
        score.scores[dpanel.crop] = 100.0 * rmse(ev) / national_mean
        score.mean_production[dpanel.crop] = float(np.mean(dpanel.production))

    logger.info(f"Scored {len(scores)} departments")
    return [scores[d] for d in sorted(scores)]


def strata_labels(cutoffs: List[float]) -> List[str]:
    labels, lower = [], 0.0
    for i, cutoff in enumerate(cutoffs):
        opening = "[" if i == 0 else "]"
        labels.append(f"{opening}{lower:g}-{cutoff:g}]")
        lower = cutoff
    return labels


def _check_cutoffs(cutoffs: List[float]):
    if not cutoffs or cutoffs[-1] != 100:
        raise AnalysisError(f"strata cutoffs must end at 100, got {cutoffs}")
    if any(c <= 0 for c in cutoffs) or any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise AnalysisError(f"strata cutoffs must be positive and strictly ascending, got {cutoffs}")


def aggregate_errors(members: List[DepartmentScore], national_production: Dict[str, pd.Series]) -> Dict[str, float]:
    """Per crop: CV(RMSE) of the per-year sum of signed department errors, in % of national production."""
    by_crop: Dict[str, List[pd.Series]] = defaultdict(list)
    for score in members:
        for crop, ev in score.errors.items():
            by_crop[crop].append(pd.Series(ev.errors, index=ev.years))

    result = {}
    for crop, series in by_crop.items():
        summed = pd.concat(series, axis=1).fillna(0.0).sum(axis=1).sort_index()
        national_mean = float(national_production[crop].reindex(summed.index).mean())
        result[crop] = 100.0 * rmse(summed.to_numpy()) / national_mean
    return result


def stratify(scores: List[DepartmentScore], dpanels: List[DepartmentPanel], national: List[CropPanel],
             cutoffs: Optional[List[float]] = None, weighting: str = "mean") -> Stratification:
    """Greedy partition of departments into nested strata [0, c].

    Departments are visited by ascending score; one joins the current stratum
    when the cumulative set keeps every crop's aggregate error <= c. The last
    cutoff takes whatever is left.
    """
    cutoffs = [float(c) for c in (cutoffs or STRATA_CUTOFFS)]
    _check_cutoffs(cutoffs)
    if weighting not in WEIGHTINGS:
        raise AnalysisError(f"unknown strata weighting '{weighting}'")

    national_production = _national_series(national)
    crops = sorted({d.crop for d in dpanels} | {c for s in scores for c in s.errors})
    labels = strata_labels(cutoffs)
    sort_keys = {s.department: s.sort_key(weighting) for s in scores}
    ordered = sorted(scores, key=lambda s: (sort_keys[s.department], s.department))

    assignment: Dict[str, str] = {}
    cumulative: List[DepartmentScore] = []
    cumulative_errors: Dict[str, Dict[str, float]] = {}
    remaining = list(ordered)
    for cutoff, label in zip(cutoffs, labels):
        last = label == labels[-1]
        still_remaining = []
        for score in remaining:
            candidate = cumulative + [score]
            fits = last or all(v <= cutoff for v in aggregate_errors(candidate, national_production).values())
            if fits:
                cumulative = candidate
                assignment[score.department] = label
            else:
                still_remaining.append(score)
        remaining = still_remaining
        errors = aggregate_errors(cumulative, national_production)
        cumulative_errors[label] = {crop: errors.get(crop, 0.0) for crop in crops}
        logger.debug(f"stratum {label}: {sum(1 for v in assignment.values() if v == label)} departments")

    stratum_errors = {}
    for label in labels:
        members = [s for s in ordered if assignment[s.department] == label]
        errors = aggregate_errors(members, national_production)
        stratum_errors[label] = {crop: errors.get(crop, 0.0) for crop in crops}

    stratification = Stratification(
        cutoffs=cutoffs, labels=labels, order=[s.department for s in ordered],
        assignment=assignment, sort_keys=sort_keys,
        cumulative_errors=cumulative_errors, stratum_errors=stratum_errors,
    )
    logger.info(f"Stratified {len(assignment)} departments: {stratification.sizes()}")
    return stratification


def variability_production_correlation(scores: List[DepartmentScore],
                                       dpanels: List[DepartmentPanel]) -> CorrelationResult:
    """Pearson r between a department's mean score and its mean total production."""
    production: Dict[str, float] = defaultdict(float)
    for dpanel in dpanels:
        production[dpanel.department] += float(np.mean(dpanel.production))
    departments = [s for s in scores if s.department in production]
    return pearson([s.mean_score() for s in departments], [production[s.department] for s in departments])


# --- Rainfall ---
def rainfall_yield_correlation(rpanel: RainfallPanel, panels: List[CropPanel], variable: str = "yield",
                               alpha: float = SIGNIFICANCE_LEVEL,
                               first_decade: int = RAINY_SEASON_FIRST_DECADE,
                               last_decade: int = RAINY_SEASON_LAST_DECADE) -> List[RainfallCorrelation]:
    """Correlate the crop variable with rainfall accumulated from first_decade to each endpoint."""
    season = rpanel.cumulative(first_decade, last_decade)
    incomplete = season.index[season.isna()].tolist()
    if incomplete:
        logger.warning(f"Rainfall years {incomplete} miss decades {first_decade}..{last_decade}; dropped")
    complete_years = set(season.index[season.notna()].tolist())

    endpoints = list(range(first_decade, last_decade + 1))
    results = []
    for panel in sorted(panels, key=lambda p: p.crop):
        target = panel.series(variable)
        years = sorted(complete_years & set(target.index.tolist()))
        if len(years) < MIN_RAINFALL_YEARS:
            raise AnalysisError(
                f"{panel.crop}: {len(years)} years overlap with rainfall, at least {MIN_RAINFALL_YEARS} required"
            )
        y = target.loc[years].to_numpy(dtype=float)

        correlations = []
        for endpoint in endpoints:
            x = rpanel.cumulative(first_decade, endpoint).loc[years].to_numpy(dtype=float)
            try:
                correlations.append(pearson(x, y))
            except AnalysisError as e:
                logger.debug(f"{panel.crop} endpoint {endpoint}: {e}")
                correlations.append(CorrelationResult(r=float("nan"), p_value=float("nan"), n=len(years)))
        results.append(RainfallCorrelation(crop=panel.crop, variable=variable, endpoints=endpoints,
                                           correlations=correlations, alpha=alpha))
    return results
