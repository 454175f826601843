import hashlib
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from config import FLOAT_FORMAT, OUTPUT_FILES

logger = logging.getLogger(__name__)


def format_value(value) -> str:
    """Fixed text form of a table cell: floats at 6 significant digits, blank when missing or undefined."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return ""
        text = FLOAT_FORMAT.format(float(value))
        return "0" if text == "-0" else text
    return str(value)


def format_table(df: pd.DataFrame) -> pd.DataFrame:
    if df.empty:
        return df.astype(str)
    return df.apply(lambda column: column.map(format_value)).astype(str)


def write_table(path, df: pd.DataFrame):
    format_table(df).to_csv(path, index=False, lineterminator="\n")


def write_section(out_dir, key: str, df: pd.DataFrame) -> Path:
    """Write one analysis table under its fixed file name."""
    path = Path(out_dir) / OUTPUT_FILES[key]
    write_table(path, df)
    if df.empty:
        logger.warning(f"{OUTPUT_FILES[key]} written with no rows")
    else:
        logger.info(f"Wrote {OUTPUT_FILES[key]} ({len(df)} rows)")
    return path


def file_digest(path) -> str:
    sha = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            sha.update(chunk)
    return sha.hexdigest()
