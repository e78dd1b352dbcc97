#!/usr/bin/env python3
"""
Tests for the layered run configuration.
"""

import os
import sys
from pathlib import Path

import pytest
import yaml

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data_processor.analyzer import ZeroSpeedMode
from data_processor.descriptive_stats import BinningKind
from data_processor.errors import ConfigError
from data_processor.report_writer import OutputFormat
from data_processor.run_config import THREADS_ENV, RunConfig, load_config_file, resolve_config

ROOT = Path(__file__).resolve().parent.parent


def write_yaml(path: Path, content) -> Path:
    path.write_text(yaml.safe_dump(content), encoding="utf-8")
    return path


def test_repository_config_loads():
    config = RunConfig.from_dict(load_config_file(ROOT / "config.yaml"))
    assert config.quantiles == (0.1, 0.25, 0.5, 0.75, 0.9)
    assert config.bootstrap == 200
    assert config.zero_policy.mode is ZeroSpeedMode.DROP_PAIR
    assert config.binning.kind is BinningKind.FREEDMAN_DIACONIS
    assert config.output_format is OutputFormat.TEXT
    assert len(config.build_model_spec().column_names) == 30


def test_test_fixture_config_loads():
    config = resolve_config(ROOT / "tests" / "test_config.yaml", environ={})
    assert config.quantiles == (0.1, 0.5, 0.9)
    assert (config.bootstrap, config.seed) == (20, 7)
    assert config.output_format is OutputFormat.CSV


def test_yaml_round_trip():
    config = RunConfig(quantiles=(0.2, 0.8), bootstrap=50, seed=3, threads=2, output_format=OutputFormat.JSON,
                       model_spec={"continuous": ["distance_miles"]})
    assert RunConfig.from_dict(yaml.safe_load(config.to_yaml())) == config


def test_precedence_of_layers(tmp_path):
    path = write_yaml(tmp_path / "run.yaml", {"runtime": {"threads": 2}, "bootstrap": {"seed": 5}})
    assert resolve_config(environ={THREADS_ENV: "3"}).threads == 3
    assert resolve_config(path, environ={THREADS_ENV: "3"}).threads == 2
    flagged = resolve_config(path, {"runtime.threads": 6, "bootstrap.seed": None}, environ={THREADS_ENV: "3"})
    assert flagged.threads == 6
    assert flagged.seed == 5
    assert resolve_config(environ={}).threads == 1


def test_file_merges_over_defaults(tmp_path):
    path = write_yaml(tmp_path / "run.yaml", {"model": {"fits": "ols"}})
    config = resolve_config(path, environ={})
    assert config.models == "ols"
    assert config.quantiles == (0.1, 0.25, 0.5, 0.75, 0.9)


@pytest.mark.parametrize("content", [
    {"model": {"quantiles": [0.5, 0.5]}},
    {"model": {"quantiles": [0.0, 0.5]}},
    {"model": {"fits": "lasso"}},
    {"bootstrap": {"resamples": 0}},
    {"volatility": {"zero_policy": "ignore"}},
    {"output": {"format": "xml"}},
    {"plots": {"enabled": True}},
])
def test_invalid_settings_are_config_errors(tmp_path, content):
    path = write_yaml(tmp_path / "bad.yaml", content)
    with pytest.raises(ConfigError):
        resolve_config(path, environ={})


def test_unreadable_config_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.yaml")
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config_file(empty)
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config_file(listing)
    with pytest.raises(ConfigError):
        resolve_config(environ={THREADS_ENV: "many"})


def test_config_hash_ignores_threads_and_output_dir():
    base = RunConfig()
    assert RunConfig(threads=8, output_dir="elsewhere").config_hash == base.config_hash
    assert RunConfig(seed=1).config_hash != base.config_hash
    assert len(base.config_hash) == 64


def test_inputs_must_exist_outside_the_output_dir(tmp_path):
    cycles = tmp_path / "cycles.csv"
    cycles.write_text("trip_id,t_sec,speed_mph\n", encoding="utf-8")
    RunConfig(inputs={"cycles": str(cycles)}, output_dir=str(tmp_path / "out")).validate_paths()
    with pytest.raises(ConfigError):
        RunConfig(inputs={"cycles": str(cycles)}, output_dir=str(tmp_path)).validate_paths()
    with pytest.raises(ConfigError):
        RunConfig(inputs={"cycles": str(tmp_path / "nope.csv")}).validate_paths()
