from pathlib import Path
from typing import Dict

TOOL_NAME = "cropreq"
TOOL_VERSION = "1.0.0"

SIGNIFICANCE_LEVEL = 0.01
UNIT_IDENTITY_TOLERANCE = 0.05

REQUIREMENT_STEP = 0.005
REQUIREMENT_CAP = 0.50
GRID_RANGE = 0.50
GRID_STEP = 0.01

STRATA_CUTOFFS = [10.0, 20.0, 30.0, 100.0]
MIN_LOOCV_YEARS = 4
MIN_RAINFALL_YEARS = 5

# June decade 1 .. October decade 3
DECADES_PER_YEAR = 36
RAINY_SEASON_FIRST_DECADE = 16
RAINY_SEASON_LAST_DECADE = 30

VARIABLES = ["production", "area", "yield"]
COMPONENTS = ["cropland", "area", "yield"]

NATIONAL_COLUMNS = ["crop", "year", "production_kt", "area_kha", "yield_tha"]
CROPLAND_COLUMN = "cropland_kha"
DEPARTMENT_COLUMNS = ["department", "crop", "year", "production_kt"]
RAINFALL_COLUMNS = ["year", "decade", "rain_mm"]

FLOAT_FORMAT = "{:.6g}"

OUTPUT_FILES = {
    "describe": "describe.csv",
    "trend": "trend.csv",
    "cascade": "cascade.csv",
    "requirements": "requirements.csv",
    "key_values": "requirement_key_values.csv",
    "grid_best": "grid_best.csv",
    "grid_area_yield": "grid_area_yield.csv",
    "isolines": "isolines.csv",
    "strata": "strata.csv",
    "rainfall_corr": "rainfall_corr.csv",
    "error_dist": "error_dist.csv",
}
MANIFEST_FILE = "manifest.txt"

# keys accepted in a --config file, mapped to their default
CONFIG_DEFAULTS = {
    "national": None,
    "departments": None,
    "rainfall": None,
    "cropland_column": False,
    "alpha": SIGNIFICANCE_LEVEL,
    "req_step": REQUIREMENT_STEP,
    "req_cap": REQUIREMENT_CAP,
    "grid_range": GRID_RANGE,
    "grid_step": GRID_STEP,
    "strata": "10,20,30",
    "strata_weighting": "mean",
    "req_exclude": "",
    "perfect": "cropland",
    "rain_variables": "yield",
    "out": "report",
    "seed": 0,
    "workers": 1,
}


def load_config_file(path) -> Dict[str, str]:
    """Read a plain key=value config file. Values are returned as text."""
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    values = {}
    with open(config_path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{config_path}:{line_number}: expected key=value, got '{line}'")
            key, value = line.split("=", 1)
            key = key.strip().lower().replace("-", "_")
            if key not in CONFIG_DEFAULTS:
                raise ValueError(f"{config_path}:{line_number}: unknown config key '{key}'")
            values[key] = value.strip()
    return values
