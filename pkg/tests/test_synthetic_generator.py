#!/usr/bin/env python3
"""
Tests for the seeded synthetic data generator.
"""

import os
import sys

import numpy as np
import pytest

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data_collector.cycle_collector import CycleCollector
from data_collector.multi_source_collector import MultiSourceCollector
from data_collector.records import TableKind
from data_collector.synthetic_generator import (
    CycleParams, NoiseKind, NoiseModel, PUBLISHED_OLS_COEFFICIENTS, gen_cycle, gen_dataset, gen_heteroskedastic_design,
)
from data_collector.table_collector import TableCollector
from data_processor.analyzer import VolatilityAnalyzer, log_returns, volatility
from data_processor.design_matrix import ModelSpec, build_design, published_model_spec
from data_processor.errors import ParameterError
from data_processor.regression import fit_ols

LINEAR_SPEC = ModelSpec(continuous=("distance_miles", "n_stops"))


def test_zero_target_gives_zero_volatility():
    cycle = gen_cycle(CycleParams(600, 30.0, 0.0, seed=1))
    assert np.all(cycle.speed == 30.0)
    assert volatility(log_returns(cycle.speed)) == 0.0


def test_cycle_realizes_the_target_volatility():
    cycle = gen_cycle(CycleParams(5000, 25.0, 13.0, seed=42))
    assert volatility(log_returns(cycle.speed)) == pytest.approx(13.0, rel=0.03)


def test_stops_insert_zero_speed_dwells():
    cycle = gen_cycle(CycleParams(300, 20.0, 8.0, n_stops=3, seed=4, dwell_seconds=10))
    assert len(cycle) == 300 + 3 * 10
    assert int(np.sum(cycle.speed == 0.0)) == 30
    assert cycle.t.tolist() == list(range(330))
    assert cycle.speed[0] == 20.0


def test_cycles_are_seeded():
    params = CycleParams(200, 30.0, 10.0, n_stops=2, seed=3)
    assert gen_cycle(params) == gen_cycle(params)
    assert gen_cycle(params) != gen_cycle(CycleParams(200, 30.0, 10.0, n_stops=2, seed=4))


def test_cycle_parameters_are_validated():
    with pytest.raises(ParameterError):
        CycleParams(1, 30.0, 10.0)
    with pytest.raises(ParameterError):
        CycleParams(100, 0.0, 10.0)
    with pytest.raises(ParameterError):
        CycleParams(100, 30.0, -1.0)


def test_dataset_files_are_identical_for_a_seed():
    first = gen_dataset(30, seed=8).files()
    second = gen_dataset(30, seed=8).files()
    assert first == second
    assert first["trips.csv"] != gen_dataset(30, seed=9).files()["trips.csv"]


def test_empty_dataset_writes_header_only_files(tmp_path):
    dataset = gen_dataset(0, seed=1)
    paths = dataset.write(tmp_path)
    for name in ("cycles.csv", "trips.csv", "vehicles.csv", "persons.csv"):
        assert len(paths[name].read_text(encoding="utf-8").splitlines()) == 1
    assert CycleCollector().parse_cycles(paths["cycles.csv"]).cycles == []
    assert TableCollector().parse_tables(paths["trips.csv"], TableKind.TRIP).records == []


def test_generated_files_parse_without_rejects(tmp_path):
    dataset = gen_dataset(40, seed=12)
    paths = dataset.write(tmp_path)
    cycles = CycleCollector().parse_cycles(paths["cycles.csv"])
    assert cycles.rejects == []
    assert cycles.cycles == dataset.cycles
    for name, kind in (("trips.csv", TableKind.TRIP), ("vehicles.csv", TableKind.VEHICLE),
                       ("persons.csv", TableKind.PERSON)):
        result = TableCollector().parse_tables(paths[name], kind)
        assert result.rejects == []
        assert sum(result.missing_cells.values()) == 0


def test_coefficient_count_must_match_the_design():
    with pytest.raises(ParameterError):
        gen_dataset(10, coefficients=[1.0, 2.0], spec=LINEAR_SPEC)


def test_default_coefficients_are_the_published_ols_column():
    dataset = gen_dataset(5, seed=0)
    names = published_model_spec().column_names
    assert list(dataset.manifest["coefficients"]) == list(names)
    assert dataset.manifest["coefficients"]["n_stops"] == PUBLISHED_OLS_COEFFICIENTS["n_stops"]


def test_noiseless_targets_follow_the_linear_model():
    beta = [14.0, -0.1, 0.3]
    dataset = gen_dataset(150, coefficients=beta, spec=LINEAR_SPEC, seed=21)
    design = build_design(dataset.truth, LINEAR_SPEC)
    expected = np.maximum(design.X @ np.asarray(beta), 0.0)
    np.testing.assert_allclose(design.y, expected, rtol=0, atol=1e-12)


def test_measured_volatility_recovers_the_coefficients():
    beta = [14.0, -0.1, 0.3]
    dataset = gen_dataset(300, coefficients=beta, spec=LINEAR_SPEC, seed=33)
    volatilities, _ = VolatilityAnalyzer(min_returns=10).trip_volatilities(dataset.cycles)
    rows, report = MultiSourceCollector().join_dataset(volatilities, dataset.trips, dataset.vehicles,
                                                       dataset.persons)
    assert report.total_unmatched == 0
    fit = fit_ols(build_design(rows, LINEAR_SPEC))
    assert fit.coefficient("intercept") == pytest.approx(14.0, abs=0.5)
    assert fit.coefficient("distance_miles") == pytest.approx(-0.1, abs=0.03)
    assert fit.coefficient("n_stops") == pytest.approx(0.3, abs=0.15)


def test_noise_models():
    design = gen_heteroskedastic_design(5, seed=1)
    z = np.ones(5)
    assert NoiseModel().draw(design, z).tolist() == [0.0] * 5
    assert NoiseModel(NoiseKind.NORMAL, 2.0).draw(design, z).tolist() == [2.0] * 5
    scaled = NoiseModel(NoiseKind.HETEROSKEDASTIC, 1.0, "x").draw(design, z)
    np.testing.assert_allclose(scaled, 1.0 + design.column("x"))
    with pytest.raises(ParameterError):
        NoiseModel(NoiseKind.HETEROSKEDASTIC)
    with pytest.raises(ParameterError):
        NoiseModel(NoiseKind.HETEROSKEDASTIC, 1.0, "missing").draw(design, z)
