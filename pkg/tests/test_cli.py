#!/usr/bin/env python3
"""
End-to-end tests of the command line: synthetic fixture, full pipeline, exit codes.
"""

import json
import os
import sys
from pathlib import Path

import pytest

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from main import main

ROOT = Path(__file__).resolve().parent.parent
FIXTURE_CONFIG = ROOT / "tests" / "test_config.yaml"
GOLDENS = ROOT / "tests" / "goldens"


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    directory = tmp_path_factory.mktemp("fixture")
    assert main(["synth", "--output-dir", str(directory), "--trips-count", "200", "--seed", "11"]) == 0
    return directory


def input_flags(directory: Path):
    return ["--cycles", str(directory / "cycles.csv"), "--trips", str(directory / "trips.csv"),
            "--vehicles", str(directory / "vehicles.csv"), "--persons", str(directory / "persons.csv")]


def run_pipeline(fixture_dir: Path, output_dir: Path, threads: int) -> Path:
    argv = ["pipeline", "--config", str(FIXTURE_CONFIG), "--output-dir", str(output_dir),
            "--threads", str(threads)] + input_flags(fixture_dir)
    assert main(argv) == 0
    return output_dir


def contents_without_header(directory: Path):
    return {path.name: path.read_text(encoding="utf-8").splitlines()[1:]
            for path in sorted(directory.iterdir())}


def test_help_exits_cleanly():
    with pytest.raises(SystemExit) as excinfo:
        main(["--help"])
    assert excinfo.value.code == 0


def test_usage_errors_exit_with_status_two():
    with pytest.raises(SystemExit) as excinfo:
        main(["pipeline", "--bogus"])
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2


def test_missing_input_exits_with_status_one(tmp_path):
    assert main(["volatility", "--cycles", str(tmp_path / "none.csv"), "--output-dir", str(tmp_path / "out")]) == 1


def test_synth_writes_the_fixture(fixture_dir):
    names = sorted(path.name for path in fixture_dir.iterdir())
    assert names == [
        "cycles.csv", "manifest.json", "persons.csv", "synth_manifest.json", "trips.csv", "vehicles.csv"]
    truth = json.loads((fixture_dir / "synth_manifest.json").read_text(encoding="utf-8"))
    assert truth["n_trips"] == 200
    assert truth["seed"] == 11

    run = json.loads((fixture_dir / "manifest.json").read_text(encoding="utf-8"))
    assert run["command"] == "synth"
    assert len(run["config_hash"]) == 64
    assert run["metadata"]["config_hash"] == run["config_hash"]
    assert run["inputs"] == {}
    assert run["outputs"] == ["cycles.csv", "persons.csv", "synth_manifest.json", "trips.csv", "vehicles.csv"]


def test_volatility_command(fixture_dir, tmp_path):
    out = tmp_path / "volatility"
    assert main(["volatility", "--format", "csv", "--output-dir", str(out)] + input_flags(fixture_dir)) == 0
    lines = (out / "volatility.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# tool=drive-volatility")
    assert lines[1] == "trip_id,volatility_pct,n_returns,n_dropped_zero"
    assert len(lines) > 100
    assert (out / "manifest.json").exists()


def test_pipeline_is_reproducible_across_runs_and_threads(fixture_dir, tmp_path):
    first = contents_without_header(run_pipeline(fixture_dir, tmp_path / "run1", threads=1))
    second = contents_without_header(run_pipeline(fixture_dir, tmp_path / "run2", threads=1))
    threaded = contents_without_header(run_pipeline(fixture_dir, tmp_path / "run4", threads=4))

    for name in ("coefficients.csv", "profile.csv", "descriptive.csv", "histogram.csv", "fits.json",
                 "volatility.csv", "data_quality.json", "manifest.json"):
        assert name in first
    assert first == second
    assert first == threaded


def test_pipeline_reports(fixture_dir, tmp_path):
    out = run_pipeline(fixture_dir, tmp_path / "reports", threads=2)
    coefficients = (out / "coefficients.csv").read_text(encoding="utf-8").splitlines()
    assert coefficients[1] == "Variable,OLS (mean),10th Percentile,50th Percentile,90th Percentile"
    assert any(line.startswith("Constant,") for line in coefficients)

    fits = json.loads((out / "fits.json").read_text(encoding="utf-8"))["fits"]
    assert [fit["kind"] for fit in fits] == ["ols", "quantile", "quantile", "quantile"]
    for fit in fits:
        assert 0.0 <= fit["fit_measure"] <= 1.0

    quality = json.loads((out / "data_quality.json").read_text(encoding="utf-8"))
    assert quality["join"]["missing_vehicle"] == 0
    assert quality["join"]["missing_person"] == 0

    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "pipeline"
    assert set(manifest["inputs"]) == {"cycles", "trips", "vehicles", "persons"}
    assert "profile.csv" in manifest["outputs"]


def test_volatility_command_matches_the_golden_files(tmp_path):
    golden = GOLDENS / "volatility"
    out = tmp_path / "golden"
    argv = ["volatility", "--cycles", str(golden / "cycles.csv"), "--output-dir", str(out),
            "--format", "csv", "--min-returns", "2"]
    assert main(argv) == 0
    for name in ("volatility.csv", "excluded_trips.csv", "cycle_rejects.csv"):
        produced = (out / name).read_text(encoding="utf-8")
        assert produced.startswith("# tool=drive-volatility")
        assert produced.split("\n", 1)[1] == (golden / name).read_text(encoding="utf-8"), name


def test_undecodable_input_exits_with_status_one(tmp_path, capsys):
    cycles = tmp_path / "cycles.csv"
    cycles.write_bytes(b"trip_id,t_sec,speed_mph\nA,0,\xff\xfe\nA,1,10\n")
    assert main(["volatility", "--cycles", str(cycles), "--output-dir", str(tmp_path / "out")]) == 1
    assert "not UTF-8" in capsys.readouterr().err
