"""
End-to-end tests of the cropreq command line and its report bundles.
"""

import sys
import tempfile
from pathlib import Path

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from cli_report import EXIT_ANALYSIS, EXIT_OK, EXIT_VALIDATION, main  # noqa: E402
from config import MANIFEST_FILE, OUTPUT_FILES  # noqa: E402
from synthetic import run_tests, write_csv, write_fixture_inputs  # noqa: E402

NATIONAL_ONLY = ["describe", "trend", "cascade", "requirements", "key_values", "grid_best", "grid_area_yield",
                 "isolines", "error_dist"]


def _files(out):
    return sorted(p.name for p in Path(out).iterdir()) if Path(out).exists() else []


def _manifest(out):
    return (Path(out) / MANIFEST_FILE).read_text(encoding="utf-8")


def test_full_run_writes_every_analysis():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        out = Path(tmp) / "report"
        code = main(["run", "--national", inputs["national"], "--departments", inputs["departments"],
                     "--rainfall", inputs["rainfall"], "--out", str(out)])
        assert code == EXIT_OK
        assert _files(out) == sorted(list(OUTPUT_FILES.values()) + [MANIFEST_FILE])
        manifest = _manifest(out)
        for name in OUTPUT_FILES.values():
            assert f"{name} = " in manifest
        assert "[skipped]\n\n[summary]" in manifest
        assert "stratum [0-10] = " in manifest


def test_national_only_run_skips_optional_analyses():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        out = Path(tmp) / "report"
        assert main(["run", "--national", inputs["national"], "--out", str(out)]) == EXIT_OK
        expected = sorted([OUTPUT_FILES[k] for k in NATIONAL_ONLY] + [MANIFEST_FILE])
        assert _files(out) == expected
        manifest = _manifest(out)
        assert "stratify = no department panel" in manifest
        assert "rainfall = no rainfall panel" in manifest


def test_reruns_are_byte_identical():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        out = Path(tmp) / "report"
        args = ["run", "--national", inputs["national"], "--departments", inputs["departments"],
                "--rainfall", inputs["rainfall"], "--out", str(out)]
        assert main(args) == EXIT_OK
        first = {name: (out / name).read_bytes() for name in _files(out)}
        assert main(args + ["--workers", "3"]) == EXIT_OK
        second = {name: (out / name).read_bytes() for name in _files(out)}
        for name in first:
            if name != MANIFEST_FILE:
                assert first[name] == second[name], name
        assert main(args) == EXIT_OK
        assert (out / MANIFEST_FILE).read_bytes() == first[MANIFEST_FILE]


def test_subcommand_output_equals_full_run_section():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        full, single = Path(tmp) / "full", Path(tmp) / "single"
        assert main(["run", "--national", inputs["national"], "--out", str(full)]) == EXIT_OK
        assert main(["requirements", "--national", inputs["national"], "--out", str(single)]) == EXIT_OK
        keys = ("requirements", "key_values", "error_dist")
        assert _files(single) == sorted([OUTPUT_FILES[k] for k in keys] + [MANIFEST_FILE])
        for key in keys:
            assert (full / OUTPUT_FILES[key]).read_bytes() == (single / OUTPUT_FILES[key]).read_bytes()


def test_requirement_key_values_honour_exclusions():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        plain, excluded = Path(tmp) / "plain", Path(tmp) / "excluded"
        assert main(["requirements", "--national", inputs["national"], "--out", str(plain)]) == EXIT_OK
        config = Path(tmp) / "cropreq.conf"
        config.write_text("req-exclude = yield:rice;area:groundnut+rice\n")
        assert main(["requirements", "--national", inputs["national"], "--config", str(config),
                     "--out", str(excluded)]) == EXIT_OK

        table = pd.read_csv(plain / OUTPUT_FILES["key_values"], keep_default_na=False).set_index("component")
        assert table.index.tolist() == ["cropland", "area", "yield"]
        assert set(table["excluded"]) == {""}
        table = pd.read_csv(excluded / OUTPUT_FILES["key_values"], keep_default_na=False).set_index("component")
        assert table.loc["yield", "excluded"] == "rice"
        assert table.loc["area", "excluded"] == "groundnut,rice"
        assert table.loc["cropland", "excluded"] == ""
        assert "req_exclude = area:groundnut+rice;yield:rice\n" in _manifest(excluded)
        requirements = OUTPUT_FILES["requirements"]
        assert (plain / requirements).read_bytes() == (excluded / requirements).read_bytes()


def test_grid_export_size():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp, crops=("millet",))
        out = Path(tmp) / "grids"
        assert main(["grids", "--national", inputs["national"], "--grid-range", "0.5", "--grid-step", "0.01",
                     "--out", str(out)]) == EXIT_OK
        cells = pd.read_csv(out / OUTPUT_FILES["grid_area_yield"])
        labels = pd.read_csv(out / OUTPUT_FILES["grid_best"])
        assert len(cells) == 101 * 101
        assert len(labels) == 101 * 101
        assert set(labels["best_stage"]) <= {"MAY", "JUL", "AUG"}


def test_empty_input_exits_with_validation_code():
    with tempfile.TemporaryDirectory() as tmp:
        empty = Path(tmp) / "empty.csv"
        empty.write_text("")
        out = Path(tmp) / "report"
        assert main(["run", "--national", str(empty), "--out", str(out)]) == EXIT_VALIDATION
        assert _files(out) == []


def test_two_year_series_is_an_analysis_error():
    with tempfile.TemporaryDirectory() as tmp:
        path = write_csv(Path(tmp) / "n.csv", ["crop", "year", "production_kt", "area_kha", "yield_tha"],
                         [["millet", 2000, 120.0, 100.0, 1.2], ["millet", 2001, 132.0, 110.0, 1.2]])
        out = Path(tmp) / "report"
        assert main(["trend", "--national", str(path), "--out", str(out)]) == EXIT_ANALYSIS
        assert _files(out) == []


def test_stratify_requires_departments():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        out = Path(tmp) / "report"
        assert main(["stratify", "--national", inputs["national"], "--out", str(out)]) == EXIT_VALIDATION


def test_flags_override_config_file():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        out = Path(tmp) / "report"
        config = Path(tmp) / "cropreq.conf"
        config.write_text(f"# shared settings\nnational = {inputs['national']}\nalpha = 0.05\nreq-step = 0.01\n")
        assert main(["describe", "--config", str(config), "--alpha", "0.02", "--out", str(out)]) == EXIT_OK
        manifest = _manifest(out)
        assert "alpha = 0.02\n" in manifest
        assert "req_step = 0.01\n" in manifest


def test_bad_configuration_is_a_validation_failure():
    with tempfile.TemporaryDirectory() as tmp:
        inputs = write_fixture_inputs(tmp)
        config = Path(tmp) / "cropreq.conf"
        config.write_text("colour = blue\n")
        out = str(Path(tmp) / "report")
        assert main(["describe", "--national", inputs["national"], "--config", str(config), "--out", out]) == EXIT_VALIDATION
        assert main(["describe", "--national", inputs["national"], "--alpha", "0.7", "--out", out]) == EXIT_VALIDATION
        assert main(["describe", "--national", inputs["national"], "--strata", "30,20", "--out", out]) == EXIT_VALIDATION
        for flags in (["--req-step", "1", "--req-cap", "1"],
                      ["--req-exclude", "rain:millet"],
                      ["--req-exclude", "millet"]):
            assert main(["describe", "--national", inputs["national"], "--out", out] + flags) == EXIT_VALIDATION, flags


TESTS = [
    test_full_run_writes_every_analysis,
    test_national_only_run_skips_optional_analyses,
    test_reruns_are_byte_identical,
    test_subcommand_output_equals_full_run_section,
    test_requirement_key_values_honour_exclusions,
    test_grid_export_size,
    test_empty_input_exits_with_validation_code,
    test_two_year_series_is_an_analysis_error,
    test_stratify_requires_departments,
    test_flags_override_config_file,
    test_bad_configuration_is_a_validation_failure,
]


def main_tests():
    return run_tests(TESTS, "cli_report")


if __name__ == "__main__":
    sys.exit(0 if main_tests() else 1)
