"""
Calendar-ordered production estimators evaluated by leave-one-out cross validation.

MAY  historical production baseline (with trend when significant)
JUL  cropland x crop share baseline x yield baseline
AUG  crop area estimate x yield baseline
SEP  official crop area x yield baseline
OCT  official crop area x yield estimate
NOV  official crop area x official yield
"""

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, FrozenSet, List, Optional

import numpy as np
import pandas as pd

from config import COMPONENTS, MIN_LOOCV_YEARS, SIGNIFICANCE_LEVEL
from data_ingest import CropPanel, CroplandSeries
from stats_core import AnalysisError, cv_rmse, estimation_error, loocv_mean
from trend import EXPONENTIAL, LINEAR, NONE, TrendModel, fit_kind, select_trend, trend_value

logger = logging.getLogger(__name__)

BASELINE_VARIABLES = ["production", "area", "yield", "ratio"]
TREND_POLICIES = ["auto", "none"]


class Stage(IntEnum):
    # value is the calendar month
    MAY = 5
    JUL = 7
    AUG = 8
    SEP = 9
    OCT = 10
    NOV = 11


# component whose early estimator a stage consumes
STAGE_COMPONENT = {Stage.JUL: "cropland", Stage.AUG: "area", Stage.OCT: "yield"}


@dataclass(eq=False)
class BaselinePredictor:
    variable: str
    trend: TrendModel
    years: np.ndarray
    predictions: np.ndarray
    fallback_years: List[int] = field(default_factory=list)

    def value_for(self, year) -> float:
        matches = np.flatnonzero(self.years == int(year))
        if matches.size == 0:
            raise AnalysisError(f"no {self.variable} baseline for year {year}")
        return float(self.predictions[matches[0]])

    def series(self) -> pd.Series:
        return pd.Series(self.predictions, index=self.years, name=self.variable)


@dataclass
class Baselines:
    production: BaselinePredictor
    area: BaselinePredictor
    yield_: BaselinePredictor
    ratio: Optional[BaselinePredictor] = None


@dataclass
class CropYearInputs:
    crop: str
    year: int
    production: float
    area: float
    yield_: float
    cropland: Optional[float] = None


@dataclass
class StageEstimate:
    crop: str
    year: int
    stage: Stage
    value: float
    components: Dict[str, str]


@dataclass
class CascadeReport:
    crop: str
    stage_cv: Dict[Stage, Optional[float]]
    best_available: Dict[Stage, Optional[float]]

    def rows(self) -> List[dict]:
        return [{
            "crop": self.crop,
            "stage": stage.name,
            "cv_rmse_percent": self.stage_cv[stage],
            "best_available_percent": self.best_available[stage],
        } for stage in Stage]


def loocv_baseline(panel: CropPanel, variable: str, trend_policy: str = "auto",
                   cropland: Optional[CroplandSeries] = None,
                   alpha: float = SIGNIFICANCE_LEVEL) -> BaselinePredictor:
    """Predict every year from the other years.

    The trend kind is chosen once on the full series; its parameters are refit
    on each fold and the prediction is the mean fold residual plus the trend at
    the held-out year. Crop share of cropland ("ratio") never gets a trend.
    """
    if variable not in BASELINE_VARIABLES:
        raise AnalysisError(f"unknown baseline variable '{variable}'")
    if trend_policy not in TREND_POLICIES:
        raise AnalysisError(f"unknown trend policy '{trend_policy}'")

    years = panel.years
    if variable == "ratio":
        if cropland is None:
            raise AnalysisError(f"crop share baseline for '{panel.crop}' requires a cropland series")
        values = panel.area / cropland.aligned(years)
        use_trend = False
    else:
        values = panel.values(variable)
        use_trend = trend_policy == "auto"

    min_years = MIN_LOOCV_YEARS if use_trend else 3
    if values.size < min_years:
        raise AnalysisError(f"leave-one-out baseline needs at least {min_years} years, got {values.size}")

    year0 = int(years[0])
    if not use_trend:
        model = TrendModel(kind=NONE, year0=year0)
        return BaselinePredictor(variable=variable, trend=model, years=years, predictions=loocv_mean(values))

    model = select_trend(values, years, alpha=alpha, year0=year0)
    if model.kind == NONE:
        return BaselinePredictor(variable=variable, trend=model, years=years, predictions=loocv_mean(values))

    predictions = np.empty(values.size)
    fallback_years = []
    for i, year in enumerate(years):
        keep = np.arange(values.size) != i
        train_years, train_values = years[keep], values[keep]
        kind = model.kind
        if kind == EXPONENTIAL and np.any(train_values <= 0):
            kind = LINEAR
            fallback_years.append(int(year))
            logger.warning(f"{panel.crop} {variable}: fold {year} has non-positive values, refitting linear trend")
        fold = fit_kind(kind, train_values, train_years, year0=year0)
        z_bar = float(np.mean(train_values - trend_value(fold, train_years)))
        predictions[i] = z_bar + trend_value(fold, year)
        logger.debug(f"{panel.crop} {variable} fold {year}: beta={fold.beta:.6g} z_bar={z_bar:.6g}")

    return BaselinePredictor(variable=variable, trend=model, years=years,
                             predictions=predictions, fallback_years=fallback_years)


def build_baselines(panel: CropPanel, cropland: Optional[CroplandSeries] = None,
                    alpha: float = SIGNIFICANCE_LEVEL, trend_policy: str = "auto") -> Baselines:
    ratio = loocv_baseline(panel, "ratio", cropland=cropland) if cropland is not None else None
    return Baselines(
        production=loocv_baseline(panel, "production", trend_policy, alpha=alpha),
        area=loocv_baseline(panel, "area", trend_policy, alpha=alpha),
        yield_=loocv_baseline(panel, "yield", trend_policy, alpha=alpha),
        ratio=ratio,
    )


def year_inputs(panel: CropPanel, cropland: Optional[CroplandSeries] = None) -> List[CropYearInputs]:
    cropland_values = cropland.aligned(panel.years) if cropland is not None else [None] * len(panel)
    return [
        CropYearInputs(
            crop=panel.crop,
            year=int(year),
            production=float(panel.production[i]),
            area=float(panel.area[i]),
            yield_=float(panel.yield_[i]),
            cropland=None if cropland_values[i] is None else float(cropland_values[i]),
        )
        for i, year in enumerate(panel.years)
    ]


def _check_component_errors(stage: Stage, component_errors: Optional[Dict[str, float]]) -> Dict[str, float]:
    errors = dict(component_errors or {})
    for component, e in errors.items():
        if component not in COMPONENTS:
            raise AnalysisError(f"unknown component '{component}'")
        if STAGE_COMPONENT.get(stage) != component:
            raise AnalysisError(f"error for {component} supplied to stage {stage.name}, which does not use it")
        if not abs(e) < 1:
            raise AnalysisError(f"relative error for {component} must satisfy |e| < 1, got {e}")
    return errors


def _compose(stage: Stage, area, yield_, cropland, p_base, y_base, r_base, errors: Dict[str, float]):
    if stage == Stage.MAY:
        return p_base
    if stage == Stage.JUL:
        return cropland * (1 + errors.get("cropland", 0.0)) * r_base * y_base
    if stage == Stage.AUG:
        return area * (1 + errors.get("area", 0.0)) * y_base
    if stage == Stage.SEP:
        return area * y_base
    if stage == Stage.OCT:
        return area * yield_ * (1 + errors.get("yield", 0.0))
    return area * yield_


def _provenance(stage: Stage, errors: Dict[str, float]) -> Dict[str, str]:
    def biased(component):
        return f"estimate({errors.get(component, 0.0) * 100:+.1f}%)"

    return {
        Stage.MAY: {"production": "baseline"},
        Stage.JUL: {"cropland": biased("cropland"), "ratio": "baseline", "yield": "baseline"},
        Stage.AUG: {"area": biased("area"), "yield": "baseline"},
        Stage.SEP: {"area": "observed", "yield": "baseline"},
        Stage.OCT: {"area": "observed", "yield": biased("yield")},
        Stage.NOV: {"area": "observed", "yield": "observed"},
    }[stage]


def stage_estimate(stage: Stage, inputs: CropYearInputs, baselines: Baselines,
                   component_errors: Optional[Dict[str, float]] = None) -> StageEstimate:
    errors = _check_component_errors(stage, component_errors)
    ratio = None
    if stage == Stage.JUL:
        if inputs.cropland is None or baselines.ratio is None:
            raise AnalysisError(f"stage JUL for {inputs.crop} {inputs.year} requires cropland")
        ratio = baselines.ratio.value_for(inputs.year)

    value = _compose(
        stage, inputs.area, inputs.yield_, inputs.cropland,
        baselines.production.value_for(inputs.year),
        baselines.yield_.value_for(inputs.year),
        ratio, errors,
    )
    if value <= 0:
        logger.warning(f"{inputs.crop} {inputs.year} {stage.name}: non-positive production estimate {value:.6g}")
    return StageEstimate(crop=inputs.crop, year=inputs.year, stage=stage,
                         value=float(value), components=_provenance(stage, errors))


def stage_predictions(panel: CropPanel, stage: Stage, baselines: Baselines,
                      cropland: Optional[CroplandSeries] = None,
                      component_errors: Optional[Dict[str, float]] = None) -> np.ndarray:
    """Vector form of stage_estimate over every year of the panel."""
    errors = _check_component_errors(stage, component_errors)
    cropland_values = ratio = None
    if stage == Stage.JUL:
        if cropland is None or baselines.ratio is None:
            raise AnalysisError(f"stage JUL for {panel.crop} requires cropland")
        cropland_values = cropland.aligned(panel.years)
        ratio = baselines.ratio.predictions

    values = np.asarray(_compose(
        stage, panel.area, panel.yield_, cropland_values,
        baselines.production.predictions, baselines.yield_.predictions,
        ratio, errors,
    ), dtype=float)
    if np.any(values <= 0):
        logger.warning(f"{panel.crop} {stage.name}: non-positive production estimate in some years")
    return values


def stage_cv(panel: CropPanel, stage: Stage, component_errors: Optional[Dict[str, float]] = None,
             baselines: Optional[Baselines] = None, cropland: Optional[CroplandSeries] = None,
             alpha: float = SIGNIFICANCE_LEVEL) -> float:
    """CV(RMSE) in percent of the stage's predictions against actual production."""
    if baselines is None:
        baselines = build_baselines(panel, cropland, alpha=alpha)
    predictions = stage_predictions(panel, stage, baselines, cropland, component_errors)
    ev = estimation_error(predictions, panel.production, panel.years, crop=panel.crop)
    return cv_rmse(ev, float(panel.production.mean()))


def cascade(panel: CropPanel, cropland: Optional[CroplandSeries] = None,
            perfect_components: FrozenSet[str] = frozenset({"cropland"}),
            baselines: Optional[Baselines] = None,
            alpha: float = SIGNIFICANCE_LEVEL) -> CascadeReport:
    """Per-stage CV with perfect (e=0) estimators for the listed components.

    Stages whose component is not perfect, or JUL without cropland, are left
    out; the best-available path is the running minimum over stages so far.
    """
    unknown = set(perfect_components) - set(COMPONENTS)
    if unknown:
        raise AnalysisError(f"unknown components {sorted(unknown)}")
    if baselines is None:
        baselines = build_baselines(panel, cropland, alpha=alpha)

    stage_values: Dict[Stage, Optional[float]] = {}
    best: Dict[Stage, Optional[float]] = {}
    running = None
    for stage in Stage:
        component = STAGE_COMPONENT.get(stage)
        available = component is None or component in perfect_components
        if stage == Stage.JUL and cropland is None:
            available = False
        stage_values[stage] = stage_cv(panel, stage, baselines=baselines, cropland=cropland) if available else None
        if stage_values[stage] is not None:
            running = stage_values[stage] if running is None else min(running, stage_values[stage])
        best[stage] = running
    return CascadeReport(crop=panel.crop, stage_cv=stage_values, best_available=best)
