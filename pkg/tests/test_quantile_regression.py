#!/usr/bin/env python3
"""
Tests for the check-loss fit, its objective values and pseudo-R².
"""

import itertools
import os
import sys

import numpy as np
import pytest
from scipy import stats

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data_collector.synthetic_generator import gen_heteroskedastic_design
from data_processor.design_matrix import design_from_arrays
from data_processor.errors import ConvergenceError, ParameterError, UnderdeterminedError
from data_processor.quantile_regression import (
    check_loss, empirical_quantile, fit_quantile, pseudo_r2, raw_deviation, solve_interior_point,
)
from data_processor.regression import FitKind, fit_ols

GRID = (0.1, 0.25, 0.5, 0.75, 0.9)


def vertex_minimum(X, y, loss):
    """Smallest loss over every fit interpolating p observations."""
    n, p = X.shape
    best = np.inf
    for rows in itertools.combinations(range(n), p):
        rows = list(rows)
        if abs(np.linalg.det(X[rows])) < 1e-12:
            continue
        beta = np.linalg.solve(X[rows], y[rows])
        best = min(best, loss(y - X @ beta))
    return best


def test_check_loss_examples():
    assert check_loss(0.5, [1.0, -1.0]) == 1.0
    assert check_loss(0.9, [2.0]) == pytest.approx(1.8)
    assert check_loss(0.9, [-2.0]) == pytest.approx(0.2)
    assert check_loss(0.25, [0.0, 0.0]) == 0.0
    for q in (0.0, 1.0, -0.1):
        with pytest.raises(ParameterError):
            check_loss(q, [1.0])
    with pytest.raises(ParameterError):
        check_loss(0.5, [np.nan])


@pytest.mark.parametrize("minimum, raw, expected", [
    (24905.5, 40969.8, 0.392),
    (46709.85, 74478.1, 0.373),
    (63256.52, 90392.44, 0.300),
    (55845.05, 70381.46, 0.207),
    (33972.14, 39473.44, 0.139),
])
def test_pseudo_r2_of_published_fits(minimum, raw, expected):
    assert pseudo_r2(minimum, raw) == pytest.approx(expected, abs=5e-4)


def test_pseudo_r2_edges():
    assert pseudo_r2(10.0, 10.0) == 0.0
    assert pseudo_r2(0.0, 10.0) == 1.0
    with pytest.raises(ParameterError):
        pseudo_r2(0.0, 0.0)
    with pytest.raises(ParameterError):
        pseudo_r2(-1.0, 10.0)


def test_intercept_only_median():
    design = design_from_arrays(np.empty((3, 0)), [1.0, 2.0, 3.0], names=[])
    fit = fit_quantile(design, 0.5, n_boot=0)
    assert fit.kind is FitKind.QUANTILE
    assert fit.coefficients.tolist() == pytest.approx([2.0], abs=1e-9)
    assert fit.objective == pytest.approx(1.0, abs=1e-9)
    assert fit.raw_deviation == pytest.approx(1.0)
    assert fit.fit_measure == pytest.approx(0.0, abs=1e-9)
    assert fit.label == "50th Percentile"
    assert empirical_quantile([1.0, 2.0, 3.0], 0.5) == 2.0
    assert raw_deviation([1.0, 2.0, 3.0], 0.5) == 1.0


def test_exact_line_at_every_quantile():
    x = np.arange(1.0, 11.0)
    design = design_from_arrays(x, 2.0 * x)
    for q in GRID:
        fit = fit_quantile(design, q, n_boot=0)
        assert fit.coefficients.tolist() == pytest.approx([0.0, 2.0], abs=1e-7)
        assert fit.objective == pytest.approx(0.0, abs=1e-7)
        assert fit.fit_measure == pytest.approx(1.0, abs=1e-7)


def test_matches_vertex_enumeration_and_subgradient_condition():
    rng = np.random.default_rng(2718)
    for trial in range(50):
        n = int(rng.integers(5, 31))
        q = GRID[trial % len(GRID)]
        x = rng.uniform(-5.0, 5.0, size=n)
        y = 1.0 + 0.5 * x + rng.standard_t(3, size=n)
        design = design_from_arrays(x, y)
        fit = fit_quantile(design, q, n_boot=0)

        oracle = vertex_minimum(design.X, y, lambda r: check_loss(q, r))
        assert fit.objective <= oracle + 1e-6
        assert fit.objective >= oracle - 1e-6

        residuals = y - design.X @ fit.coefficients
        zero = np.abs(residuals) <= 1e-7
        below = np.sum((residuals < 0) & ~zero)
        assert below <= n * q + 1e-9
        assert n * q <= below + np.sum(zero) + 1e-9


def test_median_is_half_the_least_absolute_deviation():
    rng = np.random.default_rng(1618)
    for _ in range(10):
        n = int(rng.integers(6, 25))
        x = rng.normal(size=n)
        y = 3.0 - x + rng.laplace(size=n)
        design = design_from_arrays(x, y)
        fit = fit_quantile(design, 0.5, n_boot=0)
        least_absolute = vertex_minimum(design.X, y, lambda r: float(np.sum(np.abs(r))))
        assert fit.objective == pytest.approx(0.5 * least_absolute, abs=1e-6)


def test_never_worse_than_ols_coefficients():
    rng = np.random.default_rng(44)
    for q in GRID:
        X = rng.normal(size=(200, 3))
        y = X @ np.array([1.0, -2.0, 0.5]) + rng.exponential(size=200)
        design = design_from_arrays(X, y)
        ols = fit_ols(design)
        fit = fit_quantile(design, q, n_boot=0)
        assert fit.objective <= check_loss(q, y - design.X @ ols.coefficients) + 1e-8


def test_equivariance_of_fitted_values():
    rng = np.random.default_rng(77)
    x = rng.uniform(0.0, 10.0, size=60)
    y = 4.0 + 0.3 * x + rng.normal(size=60)
    design = design_from_arrays(x, y)
    base = fit_quantile(design, 0.75, n_boot=0)

    scaled = fit_quantile(design.with_response(3.0 * y), 0.75, n_boot=0)
    np.testing.assert_allclose(scaled.fitted(design.X), 3.0 * base.fitted(design.X), atol=1e-6)

    # a negative scale mirrors the quantile
    mirrored = fit_quantile(design.with_response(-y), 0.25, n_boot=0)
    np.testing.assert_allclose(mirrored.fitted(design.X), -base.fitted(design.X), atol=1e-6)

    shifted = fit_quantile(design.with_response(y + 2.0 * x), 0.75, n_boot=0)
    np.testing.assert_allclose(shifted.coefficients, base.coefficients + np.array([0.0, 2.0]), atol=1e-6)


def test_scaling_a_regressor_and_shifting_the_response():
    rng = np.random.default_rng(91)
    X = rng.uniform(0.0, 10.0, size=(80, 2))
    y = 1.0 + 0.5 * X[:, 0] - 0.8 * X[:, 1] + rng.standard_t(3, size=80)
    for q in (0.25, 0.5, 0.9):
        base = fit_quantile(design_from_arrays(X, y), q, n_boot=0).coefficients

        c = 4.0
        rescaled = fit_quantile(design_from_arrays(X * np.array([1.0, c]), y), q, n_boot=0).coefficients
        np.testing.assert_allclose(rescaled, base / np.array([1.0, 1.0, c]), atol=1e-6)

        shifted = fit_quantile(design_from_arrays(X, y + 7.5), q, n_boot=0).coefficients
        np.testing.assert_allclose(shifted, base + np.array([7.5, 0.0, 0.0]), atol=1e-6)


def test_intercept_only_fit_is_monotone_in_q():
    rng = np.random.default_rng(6)
    y = rng.gamma(2.0, size=101)
    design = design_from_arrays(np.empty((101, 0)), y, names=[])
    intercepts = [fit_quantile(design, q, n_boot=0).coefficients[0] for q in GRID]
    assert all(b >= a for a, b in zip(intercepts, intercepts[1:]))
    for q, b in zip(GRID, intercepts):
        assert b == pytest.approx(empirical_quantile(y, q), abs=1e-9)


def test_constant_response_reports_zero_fit_measure():
    x = np.arange(6.0)
    fit = fit_quantile(design_from_arrays(x, np.full(6, 3.0)), 0.5, n_boot=0)
    assert fit.coefficients.tolist() == pytest.approx([3.0, 0.0], abs=1e-8)
    assert fit.fit_measure == 0.0


def test_too_few_rows_and_iteration_cap():
    with pytest.raises(UnderdeterminedError):
        fit_quantile(design_from_arrays([1.0, 2.0], [1.0, 5.0]), 0.5, n_boot=0)

    rng = np.random.default_rng(13)
    X = np.column_stack([np.ones(300), rng.normal(size=(300, 4))])
    y = rng.standard_cauchy(size=300)
    with pytest.raises(ConvergenceError) as excinfo:
        solve_interior_point(X, y, 0.3, max_iter=1)
    assert excinfo.value.gap > 0
    assert excinfo.value.quantile == 0.3


def test_heteroskedastic_slopes_follow_the_normal_quantiles():
    design = gen_heteroskedastic_design(10_000, seed=2024)
    slopes = []
    for q in GRID:
        slope = fit_quantile(design, q, n_boot=0).coefficient("x")
        assert slope == pytest.approx(3.0 + stats.norm.ppf(q), abs=0.15)
        slopes.append(slope)
    assert all(b > a for a, b in zip(slopes, slopes[1:]))
    assert fit_ols(design).coefficient("x") == pytest.approx(3.0, abs=0.1)
