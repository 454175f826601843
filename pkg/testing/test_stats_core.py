"""
Tests for error metrics, descriptive statistics and the Pearson / t p-values.
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from stats_core import (  # noqa: E402
    AnalysisError,
    cv_rmse,
    describe,
    describe_panels,
    estimation_error,
    loocv_mean,
    pearson,
    quadratic_to_arithmetic_mean,
    relative_errors,
    rmse,
    t_two_sided_p,
)
from synthetic import make_panel, run_tests  # noqa: E402


def _raises(fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except AnalysisError as e:
        return str(e)
    raise AssertionError(f"{fn.__name__} did not raise AnalysisError")


def test_signed_error_positive_means_overestimate():
    ev = estimation_error([110.0, 90.0], [100.0, 100.0], years=[2000, 2001])
    assert ev.errors.tolist() == [10.0, -10.0]
    assert ev.years.tolist() == [2000, 2001]


def test_perfect_estimator_has_zero_error():
    ev = estimation_error([100.0], [100.0])
    assert ev.errors.tolist() == [0.0]
    assert rmse(ev) == 0.0


def test_error_rejects_misaligned_inputs():
    _raises(estimation_error, [1.0, 2.0], [1.0])
    predicted = pd.Series([1.0, 2.0], index=[2000, 2001])
    actual = pd.Series([1.0, 2.0], index=[2001, 2002])
    message = _raises(estimation_error, predicted, actual)
    assert "aligned" in message


def test_rmse_of_constant_bias_is_the_bias():
    assert np.isclose(rmse(np.array([5.0, 5.0, 5.0])), 5.0)
    assert np.isclose(rmse(np.array([-3.0, -3.0])), 3.0)
    assert np.isclose(rmse(np.array([3.0, -4.0])), np.sqrt(12.5))


def test_rmse_of_empty_vector_raises():
    _raises(rmse, np.array([]))


def test_cv_rmse_is_percent_of_reference_mean():
    ev = estimation_error([110.0, 90.0], [100.0, 100.0])
    assert np.isclose(cv_rmse(ev, 100.0), 10.0)
    _raises(cv_rmse, ev, 0.0)


def test_relative_errors_in_percent():
    ev = estimation_error([110.0, 95.0], [100.0, 100.0])
    assert np.allclose(relative_errors(ev, 50.0), [20.0, -10.0])


def test_describe_uses_sample_standard_deviation():
    result = describe([1.0, 2.0, 3.0])
    assert result.min == 1.0 and result.max == 3.0
    assert np.isclose(result.mean, 2.0)
    assert np.isclose(result.cv, 50.0)


def test_describe_panels_layout():
    rng = np.random.default_rng(1)
    panels = [make_panel(rng, crop="rice"), make_panel(rng, crop="millet")]
    table = describe_panels(panels)
    assert list(table.columns) == ["crop", "variable", "min", "mean", "max", "cv_percent"]
    assert table["crop"].tolist() == ["millet"] * 3 + ["rice"] * 3
    assert table["variable"].tolist()[:3] == ["production", "area", "yield"]


def test_t_p_value_matches_student_distribution():
    for t_stat, dof in [(2.0, 10), (-1.3, 4), (3.5, 18), (0.0, 7)]:
        expected = 2 * stats.t.sf(abs(t_stat), dof)
        assert np.isclose(t_two_sided_p(t_stat, dof), expected, rtol=1e-10, atol=1e-14)
    assert t_two_sided_p(float("inf"), 5) == 0.0


def test_pearson_perfect_linear_relation():
    x = np.arange(10.0)
    result = pearson(x, 2 * x + 1)
    assert np.isclose(result.r, 1.0, atol=1e-12)
    assert result.p_value < 1e-10
    assert result.significant(0.01)


def test_pearson_matches_scipy():
    rng = np.random.default_rng(3)
    x = rng.normal(size=15)
    y = 0.3 * x + rng.normal(size=15)
    result = pearson(x, y)
    expected = stats.pearsonr(x, y)
    assert np.isclose(result.r, expected[0], rtol=1e-10)
    assert np.isclose(result.p_value, expected[1], rtol=1e-8)
    assert result.n == 15


def test_pearson_rejects_zero_variance_and_short_input():
    _raises(pearson, [1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    _raises(pearson, [1.0, 2.0], [1.0, 2.0])


def test_leave_one_out_mean():
    assert np.allclose(loocv_mean([100.0, 110.0, 90.0]), [100.0, 95.0, 105.0])


def test_quadratic_to_arithmetic_mean():
    assert np.isclose(quadratic_to_arithmetic_mean([4.0, 4.0, 4.0]), 1.0)
    assert np.isclose(quadratic_to_arithmetic_mean([1.0, 3.0]), np.sqrt(5.0) / 2.0)


TESTS = [
    test_signed_error_positive_means_overestimate,
    test_perfect_estimator_has_zero_error,
    test_error_rejects_misaligned_inputs,
    test_rmse_of_constant_bias_is_the_bias,
    test_rmse_of_empty_vector_raises,
    test_cv_rmse_is_percent_of_reference_mean,
    test_relative_errors_in_percent,
    test_describe_uses_sample_standard_deviation,
    test_describe_panels_layout,
    test_t_p_value_matches_student_distribution,
    test_pearson_perfect_linear_relation,
    test_pearson_matches_scipy,
    test_pearson_rejects_zero_variance_and_short_input,
    test_leave_one_out_mean,
    test_quadratic_to_arithmetic_mean,
]


def main():
    return run_tests(TESTS, "stats_core")


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
