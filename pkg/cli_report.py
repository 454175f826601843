"""
cropreq command line: load the input tables, run the requested analyses and
write a report bundle (one CSV per analysis plus manifest.txt).

    python cli_report.py run --national national.csv --departments departments.csv --rainfall rain.csv --out report
    python cli_report.py requirements --national national.csv --req-step 0.005
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

import pandas as pd

from accuracy_requirements import (
    USELESS,
    RequirementQuery,
    error_distributions,
    grid_area_yield,
    grid_best_estimator,
    grid_table,
    isoline_intercepts,
    isoline_table,
    requirement_key_values,
    requirements_table,
    solve_requirement,
)
from auxiliary_analyses import (
    WEIGHTINGS,
    department_scores,
    rainfall_yield_correlation,
    stratify,
    variability_production_correlation,
)
from config import (
    COMPONENTS,
    CONFIG_DEFAULTS,
    GRID_RANGE,
    GRID_STEP,
    MANIFEST_FILE,
    OUTPUT_FILES,
    REQUIREMENT_CAP,
    REQUIREMENT_STEP,
    SIGNIFICANCE_LEVEL,
    STRATA_CUTOFFS,
    TOOL_NAME,
    TOOL_VERSION,
    VARIABLES,
    load_config_file,
)
from data_ingest import (
    CropPanel,
    CroplandSeries,
    DepartmentPanel,
    InputValidationError,
    RainfallPanel,
    ValidationReport,
    load_department_panel,
    load_national_panel,
    load_rainfall_panel,
    require_valid,
)
from season_cascade import Baselines, Stage, build_baselines, cascade, stage_cv
from stats_core import AnalysisError, describe_panels
from trend import trend_table
from utils import file_digest, format_value, write_section

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_VALIDATION = 2


def setup_logging(verbose: bool = False):
    """Set up basic logging configuration (stderr, so report files stay clean)."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(message)s',
                        stream=sys.stderr)


# --- Configuration ---
@dataclass
class RunConfig:
    national: Optional[str] = None
    departments: Optional[str] = None
    rainfall: Optional[str] = None
    cropland_column: bool = False
    alpha: float = SIGNIFICANCE_LEVEL
    req_step: float = REQUIREMENT_STEP
    req_cap: float = REQUIREMENT_CAP
    req_exclude: Dict[str, List[str]] = field(default_factory=dict)
    grid_range: float = GRID_RANGE
    grid_step: float = GRID_STEP
    strata: List[float] = field(default_factory=lambda: list(STRATA_CUTOFFS))
    strata_weighting: str = "mean"
    perfect: FrozenSet[str] = frozenset({"cropland"})
    rain_variables: List[str] = field(default_factory=lambda: ["yield"])
    out: str = "report"
    seed: int = 0
    workers: int = 1

    def validate(self):
        problems = []
        if not 0 < self.alpha < 0.5:
            problems.append(f"alpha must be in (0, 0.5), got {self.alpha}")
        if not (0 < self.req_step < 1 and self.req_step <= self.req_cap <= 1):
            problems.append(f"need 0 < req-step < 1 and req-step <= req-cap <= 1, "
                            f"got {self.req_step} and {self.req_cap}")
        if not set(self.req_exclude) <= set(COMPONENTS):
            problems.append(f"req-exclude components must be among {COMPONENTS}, got {sorted(self.req_exclude)}")
        if not 0 < self.grid_step <= self.grid_range < 1:
            problems.append(f"need 0 < grid-step <= grid-range < 1, got {self.grid_step} and {self.grid_range}")
        if self.strata[-1] != 100 or any(b <= a for a, b in zip(self.strata, self.strata[1:])) or self.strata[0] <= 0:
            problems.append(f"strata must be positive, ascending and end at 100, got {self.strata}")
        if self.strata_weighting not in WEIGHTINGS:
            problems.append(f"strata-weighting must be one of {WEIGHTINGS}")
        if not self.perfect <= set(COMPONENTS):
            problems.append(f"perfect components must be among {COMPONENTS}")
        if not set(self.rain_variables) <= set(VARIABLES):
            problems.append(f"rain-variables must be among {VARIABLES}")
        if self.workers < 1:
            problems.append("workers must be at least 1")
        if not self.national:
            problems.append("--national is required")
        for name in ("national", "departments", "rainfall"):
            path = getattr(self, name)
            if path and not Path(path).exists():
                problems.append(f"Input file not found: {path}")
        if problems:
            raise InputValidationError("; ".join(problems))

    def echo(self) -> List[str]:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, dict):
                text = ";".join(f"{k}:{'+'.join(v)}" for k, v in sorted(value.items()))
            elif isinstance(value, (list, frozenset, set)):
                ordered = sorted(value) if not isinstance(value, list) else value
                text = ",".join(format_value(v) for v in ordered)
            else:
                text = format_value(value)
            lines.append(f"{f.name} = {text}")
        return lines


def _as_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _as_list(text) -> List[str]:
    return [item.strip() for item in str(text).split(",") if item.strip()]


def _as_strata(text) -> List[float]:
    cutoffs = [float(item) for item in _as_list(text)]
    if not cutoffs or cutoffs[-1] != 100:
        cutoffs.append(100.0)
    return cutoffs


def _as_exclusions(text) -> Dict[str, List[str]]:
    """`cropland:cassava;area:cassava+maize` to {"cropland": ["cassava"], "area": ["cassava", "maize"]}."""
    exclusions = {}
    for part in str(text).split(";"):
        if not part.strip():
            continue
        if ":" not in part:
            raise ValueError(f"req-exclude entry '{part.strip()}' is not component:crop+crop")
        component, crops = part.split(":", 1)
        exclusions[component.strip()] = sorted(c.strip() for c in crops.split("+") if c.strip())
    return exclusions


def _as_components(text) -> FrozenSet[str]:
    items = _as_list(text)
    return frozenset() if items == ["none"] else frozenset(items)


CONVERTERS: Dict[str, Callable] = {
    "national": lambda v: str(v) if v else None,
    "departments": lambda v: str(v) if v else None,
    "rainfall": lambda v: str(v) if v else None,
    "cropland_column": _as_bool,
    "alpha": float,
    "req_step": float,
    "req_cap": float,
    "req_exclude": _as_exclusions,
    "grid_range": float,
    "grid_step": float,
    "strata": _as_strata,
    "strata_weighting": str,
    "perfect": _as_components,
    "rain_variables": _as_list,
    "out": str,
    "seed": int,
    "workers": int,
}


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the --config file, then command-line flags."""
    values = dict(CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        try:
            values.update(load_config_file(args.config))
        except (FileNotFoundError, ValueError) as e:
            raise InputValidationError(str(e))
    for key in CONFIG_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag

    try:
        config = RunConfig(**{key: CONVERTERS[key](value) for key, value in values.items()})
    except ValueError as e:
        raise InputValidationError(f"invalid configuration value: {e}")
    config.validate()
    return config


# --- Inputs ---
@dataclass
class Inputs:
    panels: List[CropPanel]
    cropland: Optional[CroplandSeries]
    dpanels: Optional[List[DepartmentPanel]] = None
    rpanel: Optional[RainfallPanel] = None
    digests: Dict[str, Tuple[str, str]] = field(default_factory=dict)
    baselines: Dict[str, Baselines] = field(default_factory=dict)


def _log_report(report: ValidationReport, path: str):
    for issue in report.errors:
        logger.error(f"{path}: {issue}")
    for issue in report.warnings:
        logger.warning(f"{path}: {issue}")
    for issue in report.notes:
        logger.info(f"{path}: {issue}")


def load_inputs(config: RunConfig, need_departments: bool = False, need_rainfall: bool = False) -> Inputs:
    if need_departments and not config.departments:
        raise InputValidationError("--departments is required for this analysis")
    if need_rainfall and not config.rainfall:
        raise InputValidationError("--rainfall is required for this analysis")

    panels, cropland, report = load_national_panel(config.national, require_cropland=config.cropland_column)
    _log_report(report, config.national)
    require_valid(report, config.national)
    inputs = Inputs(panels=panels, cropland=cropland)
    inputs.digests["national"] = (file_digest(config.national), config.national)

    if config.departments:
        dpanels, report = load_department_panel(config.departments)
        _log_report(report, config.departments)
        require_valid(report, config.departments)
        inputs.dpanels = dpanels
        inputs.digests["departments"] = (file_digest(config.departments), config.departments)

    if config.rainfall:
        rpanel, report = load_rainfall_panel(config.rainfall)
        _log_report(report, config.rainfall)
        require_valid(report, config.rainfall)
        inputs.rpanel = rpanel
        inputs.digests["rainfall"] = (file_digest(config.rainfall), config.rainfall)
    return inputs


def per_crop(fn, panels: List[CropPanel], workers: int = 1) -> list:
    """Apply fn to each panel; results keep panel order whatever the worker count."""
    if workers <= 1:
        return [fn(panel) for panel in panels]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, panels))


def ensure_baselines(inputs: Inputs, config: RunConfig) -> Dict[str, Baselines]:
    missing = [p for p in inputs.panels if p.crop not in inputs.baselines]
    if missing:
        built = per_crop(lambda p: build_baselines(p, inputs.cropland, alpha=config.alpha), missing, config.workers)
        for panel, baselines in zip(missing, built):
            inputs.baselines[panel.crop] = baselines
    return inputs.baselines


# --- Analyses ---
# each returns ({output key: table}, summary lines)
def describe_section(inputs: Inputs, config: RunConfig):
    return {"describe": describe_panels(inputs.panels)}, [f"crops = {len(inputs.panels)}"]


def trend_section(inputs: Inputs, config: RunConfig):
    table = trend_table(inputs.panels, alpha=config.alpha)
    selected = table[table["selected"] != "none"]
    summary = [f"trend {row.crop} {row.variable} = {row.selected}" for row in selected.itertuples()]
    return {"trend": table}, summary


def cascade_section(inputs: Inputs, config: RunConfig):
    baselines = ensure_baselines(inputs, config)
    reports = per_crop(
        lambda p: cascade(p, inputs.cropland, perfect_components=config.perfect,
                          baselines=baselines[p.crop], alpha=config.alpha),
        inputs.panels, config.workers,
    )
    rows = [row for report in reports for row in report.rows()]
    summary = [f"cv_may {r.crop} = {format_value(r.stage_cv[Stage.MAY])}" for r in reports]
    return {"cascade": pd.DataFrame(rows)}, summary


def _solve_crop(panel: CropPanel, inputs: Inputs, config: RunConfig):
    baselines = inputs.baselines[panel.crop]
    return [
        solve_requirement(RequirementQuery(panel.crop, component, search_cap=config.req_cap, step=config.req_step),
                          panel, inputs.cropland, baselines, alpha=config.alpha)
        for component in COMPONENTS
    ]


def requirements_section(inputs: Inputs, config: RunConfig):
    baselines = ensure_baselines(inputs, config)
    solved = per_crop(lambda p: _solve_crop(p, inputs, config), inputs.panels, config.workers)
    results = [r for crop_results in solved for r in crop_results]

    distributions = []
    for panel, crop_results in zip(inputs.panels, solved):
        yield_result = next(r for r in crop_results if r.component == "yield")
        tolerated = yield_result.tolerated()
        e_y = 0.0 if tolerated is None else tolerated / 100.0
        if yield_result.binding_sign == "under":
            e_y = -e_y
        distributions.append(error_distributions(panel, baselines[panel.crop], e_y))

    key_values = requirement_key_values(results, exclude=config.req_exclude)
    summary = []
    for row in key_values.itertuples():
        summary.append(f"requirement {row.component} all_crops = {format_value(row.all_crops_max_error)} "
                       f"any_crop = {format_value(row.any_crop_max_error)}")
    useless = [f"{r.crop}/{r.component}" for r in results if r.status == USELESS]
    if useless:
        summary.append(f"requirement none = {','.join(useless)}")
    tables = {
        "requirements": requirements_table(results),
        "key_values": key_values,
        "error_dist": pd.concat(distributions, ignore_index=True),
    }
    return tables, summary


def _grids_crop(panel: CropPanel, inputs: Inputs, config: RunConfig):
    baselines = inputs.baselines[panel.crop]
    best = grid_best_estimator(panel, inputs.cropland, baselines, config.grid_range, config.grid_step)
    thresholds = {
        "MAY": stage_cv(panel, Stage.MAY, baselines=baselines, cropland=inputs.cropland),
        "SEP": stage_cv(panel, Stage.SEP, baselines=baselines, cropland=inputs.cropland),
    }
    area_yield = grid_area_yield(panel, config.grid_range, config.grid_step, thresholds)
    return best, area_yield


def grids_section(inputs: Inputs, config: RunConfig):
    ensure_baselines(inputs, config)
    grids = per_crop(lambda p: _grids_crop(p, inputs, config), inputs.panels, config.workers)
    best = [g[0] for g in grids]
    area_yield = [g[1] for g in grids]

    summary = []
    for grid in area_yield:
        positive = [v for v in isoline_intercepts(grid, "SEP") if v >= 0]
        intercept = format_value(positive[0] * 100) if positive else ""
        summary.append(f"sep_isoline_yield_intercept {grid.crop} = {intercept}")
    tables = {
        "grid_best": grid_table(best, "best_stage"),
        "grid_area_yield": grid_table(area_yield, "cv_rmse_percent"),
        "isolines": isoline_table(best + area_yield),
    }
    return tables, summary


def stratify_section(inputs: Inputs, config: RunConfig):
    scores = department_scores(inputs.dpanels, inputs.panels)
    strata = stratify(scores, inputs.dpanels, inputs.panels, config.strata, config.strata_weighting)
    summary = [f"stratum {label} = {size}" for label, size in strata.sizes().items()]
    try:
        correlation = variability_production_correlation(scores, inputs.dpanels)
        summary.append(f"variability_production_r = {format_value(correlation.r)}")
    except AnalysisError as e:
        logger.warning(f"Variability/production correlation skipped: {e}")
    return {"strata": strata.table()}, summary


def rainfall_section(inputs: Inputs, config: RunConfig):
    rows = []
    summary = []
    for variable in config.rain_variables:
        for result in rainfall_yield_correlation(inputs.rpanel, inputs.panels, variable=variable, alpha=config.alpha):
            rows.extend(result.rows())
            summary.append(f"rainfall {result.crop} {variable} significant_endpoints = {sum(result.significant)}")
    return {"rainfall_corr": pd.DataFrame(rows)}, summary


SECTIONS = {
    "describe": describe_section,
    "trend": trend_section,
    "cascade": cascade_section,
    "requirements": requirements_section,
    "grids": grids_section,
    "stratify": stratify_section,
    "rainfall": rainfall_section,
}
NEEDS_DEPARTMENTS = {"stratify"}
NEEDS_RAINFALL = {"rainfall"}


@dataclass
class ReportBundle:
    out_dir: Path
    outputs: Dict[str, Path] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)
    summary: List[str] = field(default_factory=list)
    manifest: Optional[Path] = None


def _manifest_lines(command: str, config: RunConfig, inputs: Inputs, bundle: ReportBundle) -> List[str]:
    lines = [f"tool = {TOOL_NAME} {TOOL_VERSION}", f"command = {command}", "", "[config]"]
    lines += config.echo()
    lines += ["", "[inputs]"]
    for name in ("national", "departments", "rainfall"):
        if name in inputs.digests:
            digest, path = inputs.digests[name]
            lines.append(f"{name} = {digest} {path}")
    lines += ["", "[outputs]"]
    for key in OUTPUT_FILES:
        if key in bundle.outputs:
            lines.append(f"{OUTPUT_FILES[key]} = {file_digest(bundle.outputs[key])}")
    lines += ["", "[skipped]"]
    lines += [f"{name} = {reason}" for name, reason in bundle.skipped.items()]
    lines += ["", "[summary]"]
    lines += bundle.summary
    return lines


def run(config: RunConfig, command: str = "run", written: Optional[List[Path]] = None) -> ReportBundle:
    """Run one analysis (or all of them for command 'run') and write the bundle."""
    written = [] if written is None else written
    selected = list(SECTIONS) if command == "run" else [command]
    inputs = load_inputs(
        config,
        need_departments=command in NEEDS_DEPARTMENTS,
        need_rainfall=command in NEEDS_RAINFALL,
    )

    bundle = ReportBundle(out_dir=Path(config.out))
    tables: Dict[str, pd.DataFrame] = {}
    for name in selected:
        if name in NEEDS_DEPARTMENTS and inputs.dpanels is None:
            bundle.skipped[name] = "no department panel (--departments)"
            logger.warning(f"Skipping {name}: no department panel")
            continue
        if name in NEEDS_RAINFALL and inputs.rpanel is None:
            bundle.skipped[name] = "no rainfall panel (--rainfall)"
            logger.warning(f"Skipping {name}: no rainfall panel")
            continue
        logger.info(f"Running {name}")
        section_tables, summary = SECTIONS[name](inputs, config)
        tables.update(section_tables)
        bundle.summary.extend(summary)

    bundle.out_dir.mkdir(parents=True, exist_ok=True)
    for key in OUTPUT_FILES:
        if key in tables:
            path = bundle.out_dir / OUTPUT_FILES[key]
            written.append(path)
            write_section(bundle.out_dir, key, tables[key])
            bundle.outputs[key] = path

    manifest = bundle.out_dir / MANIFEST_FILE
    written.append(manifest)
    with open(manifest, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(_manifest_lines(command, config, inputs, bundle)) + "\n")
    bundle.manifest = manifest
    logger.info(f"Report bundle written to {bundle.out_dir} ({len(bundle.outputs)} files + {MANIFEST_FILE})")
    return bundle


def _remove_partial(written: List[Path]):
    for path in written:
        if path.exists():
            path.unlink()
            logger.info(f"Removed partial output {path}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--national", help="National crop panel CSV (crop,year,production_kt,area_kha,yield_tha[,cropland_kha])")
    common.add_argument("--departments", help="Department production CSV (department,crop,year,production_kt)")
    common.add_argument("--rainfall", help="Decadal rainfall CSV (year,decade,rain_mm)")
    common.add_argument("--cropland-column", dest="cropland_column", action="store_true", default=None,
                        help="Require the cropland_kha column instead of synthesizing cropland")
    common.add_argument("--alpha", type=float, help="Significance level (default: 0.01)")
    common.add_argument("--req-step", dest="req_step", type=float, help="Requirement scan step (default: 0.005)")
    common.add_argument("--req-cap", dest="req_cap", type=float, help="Requirement scan cap (default: 0.50)")
    common.add_argument("--req-exclude", dest="req_exclude",
                        help="Crops left out of the key values, e.g. cropland:cassava;area:cassava+maize")
    common.add_argument("--grid-range", dest="grid_range", type=float, help="Grid half range (default: 0.50)")
    common.add_argument("--grid-step", dest="grid_step", type=float, help="Grid step (default: 0.01)")
    common.add_argument("--strata", help="Strata cutoffs in percent (default: 10,20,30; 100 is implied)")
    common.add_argument("--strata-weighting", dest="strata_weighting", choices=WEIGHTINGS,
                        help="Department sort key across crops (default: mean)")
    common.add_argument("--perfect", help="Components taken as perfect in the cascade (default: cropland)")
    common.add_argument("--rain-variables", dest="rain_variables",
                        help="Crop variables correlated with rainfall (default: yield)")
    common.add_argument("--out", help="Output directory (default: report)")
    common.add_argument("--seed", type=int, help="Random seed echoed in the manifest (default: 0)")
    common.add_argument("--workers", type=int, help="Threads for per-crop analyses (default: 1)")
    common.add_argument("--config", help="Plain key=value config file; flags override it")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Crop production variability and accuracy requirements for early production estimators",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("run", parents=[common], help="Run every analysis the inputs allow")
    for name in SECTIONS:
        subparsers.add_parser(name, parents=[common], help=f"Run the {name} analysis only")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    written: List[Path] = []
    try:
        config = build_config(args)
        run(config, args.command, written)
    except InputValidationError as e:
        logger.error(f"Input validation failed: {e}")
        _remove_partial(written)
        return EXIT_VALIDATION
    except AnalysisError as e:
        logger.error(f"Analysis failed: {e}")
        _remove_partial(written)
        return EXIT_ANALYSIS
    except Exception:
        _remove_partial(written)
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
