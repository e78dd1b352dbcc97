#!/usr/bin/env python3
"""
Tests for the least-squares fit.
"""

import math
import os
import sys

import numpy as np
import pytest

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data_processor.design_matrix import design_from_arrays
from data_processor.errors import DesignError, UnderdeterminedError
from data_processor.regression import FitKind, fit_ols


def random_problem(rng, n, k):
    X = rng.normal(size=(n, k))
    beta = rng.normal(scale=3.0, size=k + 1)
    y = beta[0] + X @ beta[1:] + rng.normal(size=n)
    return design_from_arrays(X, y)


def test_exact_line():
    x = np.arange(10.0)
    fit = fit_ols(design_from_arrays(x, 2.0 * x + 1.0))
    assert fit.kind is FitKind.OLS
    assert fit.coefficients.tolist() == pytest.approx([1.0, 2.0], abs=1e-10)
    assert fit.objective == pytest.approx(0.0, abs=1e-18)
    assert fit.fit_measure == pytest.approx(1.0)
    assert fit.label == "OLS (mean)"


def test_constant_response_has_zero_r2():
    x = np.arange(8.0)
    fit = fit_ols(design_from_arrays(x, np.full(8, 7.0)))
    assert fit.coefficients.tolist() == pytest.approx([7.0, 0.0], abs=1e-10)
    assert fit.fit_measure == 0.0


def test_matches_normal_equations():
    rng = np.random.default_rng(100)
    for _ in range(100):
        k = int(rng.integers(1, 10))
        n = int(rng.integers(k + 5, 201))
        design = random_problem(rng, n, k)
        X, y = design.X, design.y
        expected = np.linalg.solve(X.T @ X, X.T @ y)
        fit = fit_ols(design)
        np.testing.assert_allclose(fit.coefficients, expected, rtol=1e-8, atol=1e-8)

        residuals = y - X @ fit.coefficients
        assert np.max(np.abs(X.T @ residuals)) <= 1e-8 * max(1.0, np.max(np.abs(X.T @ y)))

        sigma2 = residuals @ residuals / (n - k - 1)
        classic = np.sqrt(np.diag(sigma2 * np.linalg.inv(X.T @ X)))
        np.testing.assert_allclose(fit.std_errors, classic, rtol=1e-8)
        assert 0.0 <= fit.fit_measure <= 1.0
        assert fit.df_resid == n - k - 1


def test_affine_equivariance():
    rng = np.random.default_rng(31)
    design = random_problem(rng, 80, 3)
    base = fit_ols(design)

    c, d = -2.5, 4.0
    moved = fit_ols(design.with_response(c * design.y + d))
    expected = c * base.coefficients
    expected[0] += d
    np.testing.assert_allclose(moved.coefficients, expected, rtol=1e-9, atol=1e-9)

    scaled_X = design.X * np.array([1.0, 10.0, 0.1, 3.0])
    rescaled = fit_ols(design.with_columns(scaled_X))
    np.testing.assert_allclose(rescaled.fitted(scaled_X), base.fitted(design.X), rtol=1e-9, atol=1e-9)


def test_duplicate_column_is_aliased():
    rng = np.random.default_rng(3)
    x = rng.normal(size=30)
    z = rng.normal(size=30)
    y = 1.0 + 2.0 * x - z + rng.normal(scale=0.1, size=30)
    fit = fit_ols(design_from_arrays(np.column_stack([x, x, z]), y, names=["x", "x_copy", "z"]))
    assert len(fit.aliased) == 1
    dropped = fit.aliased[0]
    kept = "x" if dropped == "x_copy" else "x_copy"
    assert math.isnan(fit.coefficient(dropped))
    assert fit.coefficient(kept) == pytest.approx(2.0, abs=0.1)
    assert fit.coefficient("z") == pytest.approx(-1.0, abs=0.1)
    columns = {c["name"]: c for c in fit.to_dict()["columns"]}
    assert columns[dropped]["coefficient"] is None


def test_underdetermined_and_non_finite():
    with pytest.raises(UnderdeterminedError):
        fit_ols(design_from_arrays([[1.0], [2.0]], [1.0, 2.0]))
    with pytest.raises(DesignError):
        fit_ols(design_from_arrays([1.0, 2.0, np.inf, 4.0], [1.0, 2.0, 3.0, 4.0]))
