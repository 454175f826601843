"""
Tests for loading and validating the national, department and rainfall tables.
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from data_ingest import (  # noqa: E402
    InputValidationError,
    load_department_panel,
    load_national_panel,
    load_rainfall_panel,
    require_valid,
    write_department_panel,
    write_national_panel,
    write_rainfall_panel,
)
from synthetic import make_departments, make_rainfall, run_tests, write_csv  # noqa: E402

NATIONAL = ["crop", "year", "production_kt", "area_kha", "yield_tha"]


def _national_rows(crop="millet", years=range(2000, 2005), area=100.0, yield_=1.2):
    return [[crop, y, area * yield_, area, yield_] for y in years]


def _issues(report):
    return [str(issue) for issue in report.errors], [str(issue) for issue in report.warnings]


def test_valid_national_panel_with_synthesized_cropland():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(Path(tmp) / "n.csv", NATIONAL, _national_rows("rice") + _national_rows("millet", area=50.0))
        panels, cropland, report = load_national_panel(path)
    errors, warnings = _issues(report)
    assert errors == []
    assert warnings == []
    assert [p.crop for p in panels] == ["millet", "rice"]
    assert panels[0].years.tolist() == list(range(2000, 2005))
    assert cropland.synthesized
    assert np.allclose(cropland.cropland, 150.0)
    assert any("synthesized" in str(n) for n in report.notes)


def test_identity_scale_panel_is_warning_free():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(Path(tmp) / "n.csv", NATIONAL, [["millet", 2000, 1, 1, 1], ["millet", 2001, 1, 1, 1]])
        panels, cropland, report = load_national_panel(path)
    assert report.accepted
    assert report.warnings == []
    assert len(panels) == 1 and cropland.synthesized


def test_unit_identity_violation_is_a_warning():
    rows = _national_rows()
    rows[1][2] = 200.0
    with tempfile.TemporaryDirectory() as tmp:
        panels, _, report = load_national_panel(write_csv(Path(tmp) / "n.csv", NATIONAL, rows))
    errors, warnings = _issues(report)
    assert errors == []
    assert any(w.startswith("line 3: unit identity violated by") for w in warnings)
    assert len(panels[0]) == 5


def test_row_level_errors_are_located():
    rows = _national_rows()
    rows[0][3] = -5.0
    rows.append(["millet", 2004, 120.0, 100.0, 1.2])
    rows.append(["millet", "abc", 120.0, 100.0, 1.2])
    with tempfile.TemporaryDirectory() as tmp:
        _, _, report = load_national_panel(write_csv(Path(tmp) / "n.csv", NATIONAL, rows))
    errors, _ = _issues(report)
    assert any(e.startswith("line 2: non-positive value") for e in errors)
    assert any(e.startswith("line 7: duplicate row") for e in errors)
    assert any(e.startswith("line 8: malformed row") for e in errors)
    assert not report.accepted


def test_missing_year_inside_series_rejected():
    rows = _national_rows(years=[2000, 2001, 2003, 2004])
    with tempfile.TemporaryDirectory() as tmp:
        panels, _, report = load_national_panel(write_csv(Path(tmp) / "n.csv", NATIONAL, rows))
    errors, _ = _issues(report)
    assert panels == []
    assert any("missing years inside series: [2002]" in e for e in errors)


def test_explicit_cropland_must_cover_crop_area():
    header = NATIONAL + ["cropland_kha"]
    rows = [r + [500.0] for r in _national_rows()]
    rows[2][5] = 80.0
    with tempfile.TemporaryDirectory() as tmp:
        _, cropland, report = load_national_panel(write_csv(Path(tmp) / "n.csv", header, rows))
    errors, _ = _issues(report)
    assert any(e.startswith("year=2002: cropland 80.0 is below") for e in errors)
    assert not cropland.synthesized
    assert 2002 not in cropland.years.tolist()


def test_required_cropland_column():
    with tempfile.TemporaryDirectory() as tmp:
        _, _, report = load_national_panel(write_csv(Path(tmp) / "n.csv", NATIONAL, _national_rows()),
                                           require_cropland=True)
    errors, _ = _issues(report)
    assert errors == ["line 1: missing columns: cropland_kha"]


def test_empty_and_missing_files():
    with tempfile.TemporaryDirectory() as tmp:
        empty = Path(tmp) / "empty.csv"
        empty.write_text("")
        _, _, report = load_national_panel(empty)
        assert _issues(report)[0] == ["line 1: file is empty"]
        try:
            require_valid(report, str(empty))
        except InputValidationError as e:
            assert "file is empty" in str(e)
        else:
            raise AssertionError("empty file accepted")
        try:
            load_national_panel(Path(tmp) / "absent.csv")
        except InputValidationError as e:
            assert "not found" in str(e)
        else:
            raise AssertionError("missing file accepted")


def test_missing_and_extra_columns():
    with tempfile.TemporaryDirectory() as tmp:
        _, _, report = load_national_panel(write_csv(Path(tmp) / "a.csv", ["crop", "year"], [["millet", 2000]]))
        assert _issues(report)[0] == ["line 1: missing columns: production_kt, area_kha, yield_tha"]
        rows = [r + ["x"] for r in _national_rows()]
        _, _, report = load_national_panel(write_csv(Path(tmp) / "b.csv", NATIONAL + ["note"], rows))
        errors, warnings = _issues(report)
        assert errors == []
        assert warnings[0] == "line 1: ignored columns: note"


def test_department_panel_keeps_zero_and_rejects_negative():
    header = ["department", "crop", "year", "production_kt"]
    rows = [["Bakel", "millet", y, 0.0] for y in range(2010, 2014)]
    rows += [["Kaffrine", "millet", y, 12.5] for y in range(2010, 2014)]
    with tempfile.TemporaryDirectory() as tmp:
        panels, report = load_department_panel(write_csv(Path(tmp) / "d.csv", header, rows))
        assert report.accepted
        assert [p.department for p in panels] == ["Bakel", "Kaffrine"]
        assert panels[0].production.tolist() == [0.0] * 4
        rows.append(["Kaffrine", "rice", 2010, -1.0])
        rows.append(["Bakel", "millet", 2010, 3.0])
        _, report = load_department_panel(write_csv(Path(tmp) / "e.csv", header, rows))
    errors, _ = _issues(report)
    assert any(e.startswith("line 10: negative production") for e in errors)
    assert any(e.startswith("line 11: duplicate row") for e in errors)


def test_rainfall_panel_rules():
    header = ["year", "decade", "rain_mm"]
    rows = [[2000, d, 0.0] for d in range(1, 37)]
    with tempfile.TemporaryDirectory() as tmp:
        panel, report = load_rainfall_panel(write_csv(Path(tmp) / "r.csv", header, rows))
        assert report.accepted
        assert panel.cell_count() == 36
        assert panel.cumulative(16, 30).tolist() == [0.0]
        rows += [[2001, 37, 1.0], [2001, 5, -2.0], [2000, 3, 1.0]]
        _, report = load_rainfall_panel(write_csv(Path(tmp) / "s.csv", header, rows))
    errors, _ = _issues(report)
    assert any("decade 37 outside 1..36" in e for e in errors)
    assert any("negative rainfall" in e for e in errors)
    assert any("duplicate row for year=2000 decade=3" in e for e in errors)


def test_normalized_national_file_reloads_identically():
    rows = _national_rows("rice") + _national_rows("millet", area=50.0, yield_=0.9)
    with tempfile.TemporaryDirectory() as tmp:
        panels, cropland, _ = load_national_panel(write_csv(Path(tmp) / "n.csv", NATIONAL, rows))
        out = Path(tmp) / "normalized.csv"
        write_national_panel(out, panels, cropland)
        again, _, report = load_national_panel(out)
        text = out.read_text()
    assert report.accepted
    assert text.splitlines()[0] == ",".join(NATIONAL)
    for a, b in zip(panels, again):
        assert a.crop == b.crop
        assert np.array_equal(a.production, b.production)
        assert np.array_equal(a.yield_, b.yield_)


def test_normalized_department_file_reloads_identically():
    rng = np.random.default_rng(3)
    dpanels, _ = make_departments(rng, n_departments=3)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "departments.csv"
        write_department_panel(out, dpanels)
        again, report = load_department_panel(out)
    assert report.accepted
    original = sorted(dpanels, key=lambda p: (p.department, p.crop))
    assert [(p.department, p.crop) for p in again] == [(p.department, p.crop) for p in original]
    for a, b in zip(original, again):
        assert np.array_equal(a.years, b.years)
        assert np.array_equal(a.production, b.production)


def test_normalized_rainfall_file_reloads_identically():
    rng = np.random.default_rng(3)
    panel = make_rainfall(rng, range(2000, 2004), missing=[(2001, 20)])
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "rainfall.csv"
        write_rainfall_panel(out, panel)
        again, report = load_rainfall_panel(out)
    assert report.accepted
    assert again.years.tolist() == [2000, 2001, 2002, 2003]
    assert again.cell_count() == 4 * 36 - 1
    assert np.array_equal(again.rain.to_numpy(), panel.rain.to_numpy(), equal_nan=True)


TESTS = [
    test_valid_national_panel_with_synthesized_cropland,
    test_identity_scale_panel_is_warning_free,
    test_unit_identity_violation_is_a_warning,
    test_row_level_errors_are_located,
    test_missing_year_inside_series_rejected,
    test_explicit_cropland_must_cover_crop_area,
    test_required_cropland_column,
    test_empty_and_missing_files,
    test_missing_and_extra_columns,
    test_department_panel_keeps_zero_and_rejects_negative,
    test_rainfall_panel_rules,
    test_normalized_national_file_reloads_identically,
    test_normalized_department_file_reloads_identically,
    test_normalized_rainfall_file_reloads_identically,
]


def main():
    return run_tests(TESTS, "data_ingest")


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
