"""
Maximum tolerable relative error of cropland, crop area and crop yield estimators,
two-dimensional error grids with isolines, and per-year error distributions.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import contourpy
import numpy as np
import pandas as pd

from config import COMPONENTS, GRID_RANGE, GRID_STEP, REQUIREMENT_CAP, REQUIREMENT_STEP, SIGNIFICANCE_LEVEL
from data_ingest import CropPanel, CroplandSeries
from season_cascade import Baselines, Stage, build_baselines, stage_cv, stage_predictions
from stats_core import AnalysisError, estimation_error, relative_errors

logger = logging.getLogger(__name__)

COMPONENT_STAGE = {"cropland": Stage.JUL, "area": Stage.AUG, "yield": Stage.OCT}
BASELINE_STAGE = {"cropland": Stage.MAY, "area": Stage.MAY, "yield": Stage.SEP}
SIGN_POLICIES = {"worst_case": (1, -1), "over_only": (1,), "under_only": (-1,)}

VALUE = "value"
USELESS = "none"
ABOVE_CAP = "above_cap"


@dataclass
class RequirementQuery:
    crop: str
    component: str
    baseline_stage: Optional[Stage] = None
    sign_policy: str = "worst_case"
    search_cap: float = REQUIREMENT_CAP
    step: float = REQUIREMENT_STEP

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise AnalysisError(f"unknown component '{self.component}'")
        if self.sign_policy not in SIGN_POLICIES:
            raise AnalysisError(f"unknown sign policy '{self.sign_policy}'")
        if not (0 < self.step < 1 and self.step <= self.search_cap <= 1):
            raise AnalysisError(f"need 0 < step < 1 and step <= cap <= 1, got step={self.step} cap={self.search_cap}")
        if self.baseline_stage is None:
            self.baseline_stage = BASELINE_STAGE[self.component]
        if self.baseline_stage != BASELINE_STAGE[self.component]:
            raise AnalysisError(
                f"{self.component} is compared with {BASELINE_STAGE[self.component].name}, "
                f"not {Stage(self.baseline_stage).name}"
            )


@dataclass
class RequirementResult:
    crop: str
    component: str
    status: str
    max_error: Optional[float]
    binding_sign: str
    baseline_stage: Stage
    baseline_cv: float
    cap: float

    def label(self) -> str:
        if self.status == USELESS:
            return "none"
        if self.status == ABOVE_CAP:
            return f"> {self.cap * 100:g}"
        return f"{self.max_error:.6g}"

    def tolerated(self) -> Optional[float]:
        """Requirement in percent with the cap standing in for '> cap'; None when useless."""
        if self.status == USELESS:
            return None
        if self.status == ABOVE_CAP:
            return self.cap * 100
        return self.max_error


@dataclass(eq=False)
class ErrorGrid:
    crop: str
    kind: str
    axis1: str
    axis2: str
    values1: np.ndarray
    values2: np.ndarray
    cells: np.ndarray
    thresholds: Dict[str, float] = field(default_factory=dict)
    isolines: Dict[str, List[np.ndarray]] = field(default_factory=dict)

    @property
    def shape(self):
        return self.cells.shape


def _worst_case(panel, stage, component, e, signs, baselines, cropland):
    worst_cv, worst_sign = None, None
    for sign in signs:
        cv = stage_cv(panel, stage, {component: sign * e}, baselines=baselines, cropland=cropland)
        if worst_cv is None or cv > worst_cv:
            worst_cv, worst_sign = cv, "over" if sign > 0 else "under"
    return worst_cv, worst_sign


def solve_requirement(q: RequirementQuery, panel: CropPanel, cropland: Optional[CroplandSeries] = None,
                      baselines: Optional[Baselines] = None,
                      alpha: float = SIGNIFICANCE_LEVEL) -> RequirementResult:
    """Largest error e on the scan grid for which the stage still beats its baseline.

    Every scan point is evaluated: with a one-sided sign policy the qualifying errors can
    form an interval away from zero. The binding sign is the worse sign at the first failing
    scan point above the result.
    """
    if baselines is None:
        baselines = build_baselines(panel, cropland, alpha=alpha)
    stage = COMPONENT_STAGE[q.component]
    signs = SIGN_POLICIES[q.sign_policy]
    baseline_cv = stage_cv(panel, q.baseline_stage, baselines=baselines, cropland=cropland)
    # relative slack so that scaled copies of a panel give the same answer
    limit = baseline_cv * (1 + 1e-12)

    n_steps = int(np.floor(q.search_cap / q.step + 1e-9))
    # a component error of 100% or more is not a valid estimate
    while n_steps > 0 and n_steps * q.step >= 1 - 1e-12:
        n_steps -= 1
    scan = []
    for k in range(1, n_steps + 1):
        e = k * q.step
        worst_cv, sign = _worst_case(panel, stage, q.component, e, signs, baselines, cropland)
        logger.debug(f"{panel.crop} {q.component} e={e:.4f}: worst CV {worst_cv:.4f} vs {baseline_cv:.4f}")
        scan.append((e, worst_cv <= limit, sign))

    passing = [k for k, (_, ok, _) in enumerate(scan) if ok]
    if not passing:
        binding = scan[0][2] if scan else "over"
        return RequirementResult(panel.crop, q.component, USELESS, None, binding,
                                 q.baseline_stage, baseline_cv, q.search_cap)
    best = passing[-1]
    if best == len(scan) - 1:
        return RequirementResult(panel.crop, q.component, ABOVE_CAP, None, scan[best][2],
                                 q.baseline_stage, baseline_cv, q.search_cap)
    return RequirementResult(panel.crop, q.component, VALUE, round(scan[best][0] * 100, 10), scan[best + 1][2],
                             q.baseline_stage, baseline_cv, q.search_cap)


def requirements_table(results: Iterable[RequirementResult]) -> pd.DataFrame:
    rows = [{
        "crop": r.crop,
        "component": r.component,
        "baseline_stage": r.baseline_stage.name,
        "baseline_cv_percent": r.baseline_cv,
        "max_error_percent": r.label(),
        "binding_sign": r.binding_sign,
    } for r in sorted(results, key=lambda r: (r.crop, COMPONENTS.index(r.component)))]
    return pd.DataFrame(rows, columns=["crop", "component", "baseline_stage", "baseline_cv_percent",
                                       "max_error_percent", "binding_sign"])


def requirement_key_values(results: Iterable[RequirementResult],
                           exclude: Optional[Dict[str, Iterable[str]]] = None) -> pd.DataFrame:
    """Per component: the error that improves every crop and the error that improves at least one.

    Crops whose component is useless ("none") are listed in `useless` and left out of both
    values; `exclude` drops further crops per component.
    """
    exclude = {k: set(v) for k, v in (exclude or {}).items()}
    results = list(results)
    rows = []
    for component in COMPONENTS:
        skipped = exclude.get(component, set())
        eligible = [r for r in results if r.component == component and r.crop not in skipped]
        if not eligible:
            continue
        numeric = [r.tolerated() for r in eligible if r.status != USELESS]
        all_crops = min(numeric) if numeric else None
        any_crop = max(numeric) if numeric else None
        rows.append({
            "component": component,
            "all_crops_max_error": all_crops,
            "any_crop_max_error": any_crop,
            "all_crops_min_accuracy": None if all_crops is None else 100 - all_crops,
            "any_crop_min_accuracy": None if any_crop is None else 100 - any_crop,
            "useless": ",".join(sorted(r.crop for r in eligible if r.status == USELESS)),
            "excluded": ",".join(sorted(skipped)),
        })
    return pd.DataFrame(rows, columns=["component", "all_crops_max_error", "any_crop_max_error",
                                       "all_crops_min_accuracy", "any_crop_min_accuracy", "useless", "excluded"])


# --- Grids ---
def grid_axis(grid_range: float = GRID_RANGE, step: float = GRID_STEP) -> np.ndarray:
    if not 0 < step <= grid_range < 1:
        raise AnalysisError(f"need 0 < step <= range < 1, got step={step} range={grid_range}")
    n = int(round(grid_range / step))
    return np.round(np.arange(-n, n + 1) * step, 10)


def extract_isolines(values1: np.ndarray, values2: np.ndarray, field_values: np.ndarray,
                     level: float) -> List[np.ndarray]:
    """Marching-squares lines of field == level as (e1, e2) point arrays."""
    generator = contourpy.contour_generator(
        x=values2, y=values1, z=np.asarray(field_values, dtype=float),
        line_type=contourpy.LineType.Separate,
    )
    return [np.column_stack([line[:, 1], line[:, 0]]) for line in generator.lines(level)]


def isoline_intercepts(grid: ErrorGrid, name: str) -> List[float]:
    """Second-axis values where the named isoline crosses first-axis value 0."""
    crossings = set()
    for line in grid.isolines.get(name, []):
        e1, e2 = line[:, 0], line[:, 1]
        for k in np.flatnonzero(e1 == 0):
            crossings.add(round(float(e2[k]), 12))
        for k in range(len(line) - 1):
            a, b = e1[k], e1[k + 1]
            if a * b < 0:
                crossings.add(round(float(e2[k] + (e2[k + 1] - e2[k]) * (-a) / (b - a)), 12))
    return sorted(crossings)


def grid_best_estimator(panel: CropPanel, cropland: CroplandSeries, baselines: Optional[Baselines] = None,
                        grid_range: float = GRID_RANGE, step: float = GRID_STEP,
                        alpha: float = SIGNIFICANCE_LEVEL) -> ErrorGrid:
    """Label each (e_c, e_a) cell with the lowest-CV stage among MAY, JUL, AUG.

    Ties go to the later stage.
    """
    if cropland is None:
        raise AnalysisError(f"best-estimator grid for {panel.crop} requires cropland")
    if baselines is None:
        baselines = build_baselines(panel, cropland, alpha=alpha)
    axis = grid_axis(grid_range, step)

    may = stage_cv(panel, Stage.MAY, baselines=baselines, cropland=cropland)
    jul = np.array([stage_cv(panel, Stage.JUL, {"cropland": e}, baselines=baselines, cropland=cropland)
                    for e in axis])
    aug = np.array([stage_cv(panel, Stage.AUG, {"area": e}, baselines=baselines, cropland=cropland)
                    for e in axis])

    jul_grid = np.broadcast_to(jul[:, None], (axis.size, axis.size))
    aug_grid = np.broadcast_to(aug[None, :], (axis.size, axis.size))
    labels = np.where(
        (aug_grid <= jul_grid) & (aug_grid <= may),
        Stage.AUG.name,
        np.where(jul_grid <= may, Stage.JUL.name, Stage.MAY.name),
    )

    boundary = extract_isolines(axis, axis, jul_grid - aug_grid, 0.0)
    return ErrorGrid(
        crop=panel.crop, kind="best_estimator", axis1="cropland", axis2="area",
        values1=axis, values2=axis, cells=labels,
        thresholds={"MAY": may},
        isolines={"JUL=AUG": boundary},
    )


def grid_area_yield(panel: CropPanel, grid_range: float = GRID_RANGE, step: float = GRID_STEP,
                    thresholds: Optional[Dict[str, float]] = None) -> ErrorGrid:
    """CV(RMSE) of a(1+e_a) * y(1+e_y) against production over an (e_a, e_y) grid."""
    identity = panel.area * panel.yield_
    residual = float(np.max(np.abs(panel.production - identity) / identity))
    if residual > 1e-9:
        logger.warning(f"{panel.crop}: production differs from area x yield by up to {residual * 100:.3g}%; "
                       f"grid cells include that residual")

    axis = grid_axis(grid_range, step)
    factor = (1 + axis)[:, None] * (1 + axis)[None, :]
    errors = factor[:, :, None] * identity[None, None, :] - panel.production[None, None, :]
    cells = 100.0 * np.sqrt(np.mean(errors ** 2, axis=2)) / float(panel.production.mean())

    thresholds = dict(thresholds or {})
    isolines = {name: extract_isolines(axis, axis, cells, level) for name, level in thresholds.items()}
    return ErrorGrid(
        crop=panel.crop, kind="area_yield", axis1="area", axis2="yield",
        values1=axis, values2=axis, cells=cells,
        thresholds=thresholds, isolines=isolines,
    )


def grid_table(grids: Iterable[ErrorGrid], value_column: str) -> pd.DataFrame:
    """Long format, row-major: crop, e1, e2, value."""
    frames = []
    for grid in sorted(grids, key=lambda g: g.crop):
        e1, e2 = np.meshgrid(grid.values1, grid.values2, indexing="ij")
        frames.append(pd.DataFrame({
            "crop": grid.crop,
            f"e_{grid.axis1}": e1.ravel(),
            f"e_{grid.axis2}": e2.ravel(),
            value_column: grid.cells.ravel(),
        }))
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def isoline_table(grids: Iterable[ErrorGrid]) -> pd.DataFrame:
    rows = []
    for grid in sorted(grids, key=lambda g: (g.crop, g.kind)):
        for name in sorted(grid.isolines):
            for line_id, line in enumerate(grid.isolines[name]):
                for point_id, (e1, e2) in enumerate(line):
                    rows.append({
                        "crop": grid.crop,
                        "grid": grid.kind,
                        "isoline": name,
                        "level": grid.thresholds.get(name, 0.0),
                        "line": line_id,
                        "point": point_id,
                        "e1": e1,
                        "e2": e2,
                    })
    return pd.DataFrame(rows, columns=["crop", "grid", "isoline", "level", "line", "point", "e1", "e2"])


def error_distributions(panel: CropPanel, baselines: Baselines, e_y: float) -> pd.DataFrame:
    """Per-year signed errors (% of mean production) of a*y_baseline and of a*y*(1+e_y)."""
    mean_production = float(panel.production.mean())
    loocv = estimation_error(stage_predictions(panel, Stage.SEP, baselines), panel.production,
                             panel.years, crop=panel.crop)
    biased = estimation_error(stage_predictions(panel, Stage.OCT, baselines, component_errors={"yield": e_y}),
                              panel.production, panel.years, crop=panel.crop)
    return pd.DataFrame({
        "crop": panel.crop,
        "year": panel.years,
        "e_yield_percent": e_y * 100,
        "loocv_error_percent": relative_errors(loocv, mean_production),
        "biased_error_percent": relative_errors(biased, mean_production),
    })
