"""
Input tables: national crop panel, department production panel, decadal rainfall.
Every row ends up either in an accepted panel or in the validation report.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import (
    CROPLAND_COLUMN,
    DECADES_PER_YEAR,
    DEPARTMENT_COLUMNS,
    NATIONAL_COLUMNS,
    RAINFALL_COLUMNS,
    UNIT_IDENTITY_TOLERANCE,
)
from stats_core import AnalysisError

logger = logging.getLogger(__name__)


class InputValidationError(ValueError):
    """An input file is missing, empty or failed validation."""


@dataclass
class ValidationIssue:
    locator: str
    rule: str

    def __str__(self):
        return f"{self.locator}: {self.rule}"


@dataclass
class ValidationReport:
    errors: List[ValidationIssue] = field(default_factory=list)
    warnings: List[ValidationIssue] = field(default_factory=list)
    notes: List[ValidationIssue] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.errors

    def error(self, locator: str, rule: str):
        self.errors.append(ValidationIssue(locator, rule))

    def warn(self, locator: str, rule: str):
        self.warnings.append(ValidationIssue(locator, rule))

    def note(self, locator: str, rule: str):
        self.notes.append(ValidationIssue(locator, rule))

    def lines(self) -> List[str]:
        return ([f"ERROR {issue}" for issue in self.errors] + [f"WARNING {issue}" for issue in self.warnings]
                + [f"NOTE {issue}" for issue in self.notes])


@dataclass(eq=False)
class CropPanel:
    crop: str
    years: np.ndarray
    production: np.ndarray
    area: np.ndarray
    yield_: np.ndarray

    def __len__(self):
        return len(self.years)

    def values(self, variable: str) -> np.ndarray:
        if variable == "production":
            return self.production
        if variable == "area":
            return self.area
        if variable == "yield":
            return self.yield_
        raise AnalysisError(f"unknown panel variable '{variable}'")

    def series(self, variable: str) -> pd.Series:
        return pd.Series(self.values(variable), index=self.years, name=variable)


@dataclass(eq=False)
class CroplandSeries:
    years: np.ndarray
    cropland: np.ndarray
    synthesized: bool = False

    def aligned(self, years) -> np.ndarray:
        """Cropland values for the requested years, in that order."""
        lookup = dict(zip(self.years.tolist(), self.cropland.tolist()))
        missing = [int(y) for y in years if int(y) not in lookup]
        if missing:
            raise AnalysisError(f"cropland series has no value for years {missing}")
        return np.array([lookup[int(y)] for y in years], dtype=float)


@dataclass(eq=False)
class DepartmentPanel:
    department: str
    crop: str
    years: np.ndarray
    production: np.ndarray

    def series(self) -> pd.Series:
        return pd.Series(self.production, index=self.years, name=self.department)


@dataclass(eq=False)
class RainfallPanel:
    # index: year, columns: decade 1..36, NaN where a cell is absent
    rain: pd.DataFrame

    @property
    def years(self) -> np.ndarray:
        return self.rain.index.to_numpy()

    def cell_count(self) -> int:
        return int(self.rain.notna().sum().sum())

    def cumulative(self, first_decade: int, last_decade: int) -> pd.Series:
        """Rainfall summed over decades first..last per year; NaN if a decade is missing."""
        block = self.rain.loc[:, first_decade:last_decade]
        return block.sum(axis=1, min_count=block.shape[1])


def require_valid(report: ValidationReport, what: str):
    if not report.accepted:
        details = "; ".join(str(issue) for issue in report.errors[:10])
        raise InputValidationError(f"{what} failed validation ({len(report.errors)} errors): {details}")


# --- Parsing helpers ---
def _read_table(path, required: List[str], optional: List[str], report: ValidationReport) -> Optional[pd.DataFrame]:
    table_path = Path(path)
    if not table_path.exists():
        raise InputValidationError(f"Input file not found: {table_path}")
    try:
        df = pd.read_csv(table_path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        report.error("line 1", "file is empty")
        return None
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        report.error("file", f"malformed file: {e}")
        return None

    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in required if c not in df.columns]
    if missing:
        report.error("line 1", f"missing columns: {', '.join(missing)}")
        return None
    extra = [c for c in df.columns if c not in required and c not in optional]
    if extra:
        report.warn("line 1", f"ignored columns: {', '.join(extra)}")
    if df.empty:
        report.error("line 2", "no data rows")
        return None
    return df


def _text(row, column: str) -> str:
    value = row.get(column)
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return str(value).strip()


def _parse_int(text: str) -> Optional[int]:
    try:
        return int(text)
    except ValueError:
        return None


def _parse_float(text: str) -> Optional[float]:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if np.isfinite(value) else None


def _check_gaps(years: List[int]) -> List[int]:
    present = set(years)
    return [y for y in range(min(years), max(years) + 1) if y not in present]


def _fmt(value) -> str:
    return repr(float(value))


# --- National panel ---
def load_national_panel(path, require_cropland: bool = False,
                        tolerance: float = UNIT_IDENTITY_TOLERANCE) -> Tuple[List[CropPanel], Optional[CroplandSeries], ValidationReport]:
    """Load `crop,year,production_kt,area_kha,yield_tha[,cropland_kha]`."""
    report = ValidationReport()
    df = _read_table(path, NATIONAL_COLUMNS, [CROPLAND_COLUMN], report)
    if df is None:
        return [], None, report

    has_cropland = CROPLAND_COLUMN in df.columns
    if require_cropland and not has_cropland:
        report.error("line 1", f"missing columns: {CROPLAND_COLUMN}")
        return [], None, report

    records: Dict[str, Dict[int, Tuple[float, float, float]]] = defaultdict(dict)
    cropland_rows: Dict[int, List[Tuple[str, float]]] = defaultdict(list)

    for idx, row in df.iterrows():
        locator = f"line {idx + 2}"
        crop = _text(row, "crop")
        year = _parse_int(_text(row, "year"))
        if not crop or year is None:
            report.error(locator, "malformed row: crop and integer year required")
            continue

        parsed = {}
        for column in NATIONAL_COLUMNS[2:] + ([CROPLAND_COLUMN] if has_cropland else []):
            parsed[column] = _parse_float(_text(row, column))
        bad = [c for c, v in parsed.items() if v is None]
        if bad:
            report.error(locator, f"malformed value in {', '.join(bad)}")
            continue
        non_positive = [c for c, v in parsed.items() if v <= 0]
        if non_positive:
            report.error(locator, f"non-positive value in {', '.join(non_positive)}")
            continue
        if year in records[crop]:
            report.error(locator, f"duplicate row for crop={crop} year={year}")
            continue

        production, area, yield_ = parsed["production_kt"], parsed["area_kha"], parsed["yield_tha"]
        expected = area * yield_
        discrepancy = abs(production - expected) / expected
        if discrepancy > tolerance:
            report.warn(locator, f"unit identity violated by {discrepancy * 100:.1f}%")

        records[crop][year] = (production, area, yield_)
        if has_cropland:
            cropland_rows[year].append((locator, parsed[CROPLAND_COLUMN]))

    panels = []
    for crop in sorted(records):
        years = sorted(records[crop])
        gaps = _check_gaps(years)
        if gaps:
            report.error(f"crop={crop}", f"missing years inside series: {gaps}")
            continue
        values = np.array([records[crop][y] for y in years], dtype=float)
        panels.append(CropPanel(
            crop=crop,
            years=np.array(years, dtype=int),
            production=values[:, 0],
            area=values[:, 1],
            yield_=values[:, 2],
        ))

    cropland = _build_cropland(records, cropland_rows, has_cropland, report)
    logger.info(f"Loaded {len(panels)} crop panels from {path} "
                f"({len(report.errors)} errors, {len(report.warnings)} warnings)")
    return panels, cropland, report


def _build_cropland(records, cropland_rows, has_cropland: bool, report: ValidationReport) -> Optional[CroplandSeries]:
    max_area: Dict[int, float] = defaultdict(float)
    total_area: Dict[int, float] = defaultdict(float)
    for crop_records in records.values():
        for year, (_, area, _) in crop_records.items():
            max_area[year] = max(max_area[year], area)
            total_area[year] += area

    if not total_area:
        return None

    if not has_cropland:
        years = sorted(total_area)
        report.note("cropland", "no cropland column; cropland synthesized as the per-year sum of crop areas")
        logger.warning("Cropland synthesized from crop areas; supply a cropland_kha column for a true series")
        return CroplandSeries(
            years=np.array(years, dtype=int),
            cropland=np.array([total_area[y] for y in years], dtype=float),
            synthesized=True,
        )

    years, values = [], []
    for year in sorted(cropland_rows):
        rows = cropland_rows[year]
        distinct = {v for _, v in rows}
        if len(distinct) > 1:
            report.error(f"year={year}", f"cropland differs between rows ({rows[0][0]} and others)")
            continue
        value = rows[0][1]
        if value < max_area[year]:
            report.error(f"year={year}", f"cropland {value} is below the largest crop area {max_area[year]}")
            continue
        years.append(year)
        values.append(value)
    return CroplandSeries(years=np.array(years, dtype=int), cropland=np.array(values, dtype=float))


def write_national_panel(path, panels: List[CropPanel], cropland: Optional[CroplandSeries] = None):
    """Write panels in normalized form (crop alphabetical, year ascending)."""
    explicit = cropland is not None and not cropland.synthesized
    columns = NATIONAL_COLUMNS + ([CROPLAND_COLUMN] if explicit else [])
    rows = []
    for panel in sorted(panels, key=lambda p: p.crop):
        cropland_values = cropland.aligned(panel.years) if explicit else None
        for i, year in enumerate(panel.years):
            row = [panel.crop, str(int(year)), _fmt(panel.production[i]), _fmt(panel.area[i]), _fmt(panel.yield_[i])]
            if explicit:
                row.append(_fmt(cropland_values[i]))
            rows.append(row)
    pd.DataFrame(rows, columns=columns).to_csv(path, index=False, lineterminator="\n")


# --- Department panel ---
def load_department_panel(path) -> Tuple[List[DepartmentPanel], ValidationReport]:
    """Load `department,crop,year,production_kt`; zero production is kept."""
    report = ValidationReport()
    df = _read_table(path, DEPARTMENT_COLUMNS, [], report)
    if df is None:
        return [], report

    records: Dict[Tuple[str, str], Dict[int, float]] = defaultdict(dict)
    for idx, row in df.iterrows():
        locator = f"line {idx + 2}"
        department = _text(row, "department")
        crop = _text(row, "crop")
        year = _parse_int(_text(row, "year"))
        production = _parse_float(_text(row, "production_kt"))
        if not department or not crop or year is None or production is None:
            report.error(locator, "malformed row: department, crop, integer year and numeric production required")
            continue
        if production < 0:
            report.error(locator, "negative production")
            continue
        if year in records[(department, crop)]:
            report.error(locator, f"duplicate row for department={department} crop={crop} year={year}")
            continue
        records[(department, crop)][year] = production

    panels = []
    for department, crop in sorted(records):
        series = records[(department, crop)]
        years = sorted(series)
        panels.append(DepartmentPanel(
            department=department,
            crop=crop,
            years=np.array(years, dtype=int),
            production=np.array([series[y] for y in years], dtype=float),
        ))
    logger.info(f"Loaded {len(panels)} department series from {path} ({len(report.errors)} errors)")
    return panels, report


def write_department_panel(path, panels: List[DepartmentPanel]):
    rows = []
    for panel in sorted(panels, key=lambda p: (p.department, p.crop)):
        for year, value in zip(panel.years, panel.production):
            rows.append([panel.department, panel.crop, str(int(year)), _fmt(value)])
    pd.DataFrame(rows, columns=DEPARTMENT_COLUMNS).to_csv(path, index=False, lineterminator="\n")


# --- Rainfall panel ---
def load_rainfall_panel(path) -> Tuple[Optional[RainfallPanel], ValidationReport]:
    """Load `year,decade,rain_mm` (country-average rainfall per 10-day period)."""
    report = ValidationReport()
    df = _read_table(path, RAINFALL_COLUMNS, [], report)
    if df is None:
        return None, report

    cells: Dict[Tuple[int, int], float] = {}
    for idx, row in df.iterrows():
        locator = f"line {idx + 2}"
        year = _parse_int(_text(row, "year"))
        decade = _parse_int(_text(row, "decade"))
        rain = _parse_float(_text(row, "rain_mm"))
        if year is None or decade is None or rain is None:
            report.error(locator, "malformed row: integer year, integer decade and numeric rain_mm required")
            continue
        if not 1 <= decade <= DECADES_PER_YEAR:
            report.error(locator, f"decade {decade} outside 1..{DECADES_PER_YEAR}")
            continue
        if rain < 0:
            report.error(locator, "negative rainfall")
            continue
        if (year, decade) in cells:
            report.error(locator, f"duplicate row for year={year} decade={decade}")
            continue
        cells[(year, decade)] = rain

    if not cells:
        return None, report

    years = sorted({y for y, _ in cells})
    rain = pd.DataFrame(np.nan, index=pd.Index(years, name="year"),
                        columns=pd.Index(range(1, DECADES_PER_YEAR + 1), name="decade"))
    for (year, decade), value in cells.items():
        rain.at[year, decade] = value
    logger.info(f"Loaded rainfall for {len(years)} years ({len(cells)} cells) from {path}")
    return RainfallPanel(rain=rain), report


def write_rainfall_panel(path, panel: RainfallPanel):
    rows = []
    for year in panel.rain.index:
        for decade in panel.rain.columns:
            value = panel.rain.at[year, decade]
            if pd.notna(value):
                rows.append([str(int(year)), str(int(decade)), _fmt(value)])
    pd.DataFrame(rows, columns=RAINFALL_COLUMNS).to_csv(path, index=False, lineterminator="\n")
