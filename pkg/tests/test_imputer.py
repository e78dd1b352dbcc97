#!/usr/bin/env python3
"""
Tests for mean and mode imputation of missing covariates.
"""

import os
import sys

import pytest

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data_collector.imputer import impute_means
from data_collector.records import BodyType
from data_processor.errors import ImputationError


def test_continuous_cells_take_the_column_mean(make_row):
    rows = [make_row("T1", distance_miles=2.0), make_row("T2", distance_miles=6.0),
            make_row("T3", distance_miles=None)]
    imputed, report = impute_means(rows)
    assert imputed[2].distance_miles == 4.0
    assert imputed[2].imputed_flags == frozenset({"distance_miles"})
    assert imputed[0] == rows[0]
    assert report.columns["distance_miles"].count == 1
    assert report.columns["distance_miles"].rule == "mean"
    assert report.total_imputed == 1


def test_categorical_cells_take_the_mode(make_row):
    rows = [make_row("T1", body_type=BodyType.SUV), make_row("T2", body_type=BodyType.SUV),
            make_row("T3", body_type=BodyType.PICKUP), make_row("T4", body_type=None),
            make_row("T5", is_female=None)]
    imputed, report = impute_means(rows)
    assert imputed[3].body_type is BodyType.SUV
    assert imputed[4].is_female is True
    assert report.to_dict()["body_type"] == {"count": 1, "fill_value": "SUV", "rule": "mode"}


def test_mode_ties_go_to_the_declared_category(make_row):
    rows = [make_row("T1", body_type=BodyType.SUV), make_row("T2", body_type=BodyType.SEDAN),
            make_row("T3", body_type=None)]
    imputed, _ = impute_means(rows)
    assert imputed[2].body_type is BodyType.SEDAN

    rows = [make_row("T1", not_employed=True), make_row("T2", not_employed=False),
            make_row("T3", not_employed=None)]
    imputed, _ = impute_means(rows)
    assert imputed[2].not_employed is False


def test_complete_rows_are_returned_unchanged(make_row):
    rows = [make_row("T1"), make_row("T2", distance_miles=9.0)]
    imputed, report = impute_means(rows)
    assert imputed == rows
    assert report.total_imputed == 0


def test_column_missing_everywhere_cannot_be_imputed(make_row):
    rows = [make_row("T1", grade_stddev=None), make_row("T2", grade_stddev=None)]
    with pytest.raises(ImputationError):
        impute_means(rows)


def test_mode_of_a_small_body_type_column(make_row):
    bodies = [BodyType.SEDAN, BodyType.SEDAN, None, BodyType.PICKUP]
    rows = [make_row(f"T{i}", body_type=body) for i, body in enumerate(bodies)]
    imputed, report = impute_means(rows)
    assert [row.body_type for row in imputed] == [BodyType.SEDAN, BodyType.SEDAN, BodyType.SEDAN, BodyType.PICKUP]
    assert report.columns["body_type"].count == 1


def test_imputing_twice_changes_nothing(make_row):
    rows = [make_row("T1", distance_miles=2.0, body_type=BodyType.SUV),
            make_row("T2", distance_miles=None, body_type=BodyType.SUV),
            make_row("T3", distance_miles=7.0, body_type=None, is_female=None),
            make_row("T4", distance_miles=3.0, n_stops=None, is_female=False)]
    once, first = impute_means(rows)
    twice, second = impute_means(once)
    assert twice == once
    assert first.total_imputed == 4
    assert second.total_imputed == 0
