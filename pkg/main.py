#!/usr/bin/env python3
"""
Driving Volatility - Main Application Entry Point

This script orchestrates the computation of per-trip driving volatility, the
assembly of the joined trip/vehicle/driver dataset, and the OLS and quantile
regression reports.
"""

import argparse
import hashlib
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from dotenv import load_dotenv

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from data_collector.cycle_collector import CycleCollector
from data_collector.imputer import impute_means
from data_collector.multi_source_collector import MultiSourceCollector
from data_collector.records import AnalysisRow, TableKind
from data_collector.synthetic_generator import NoiseKind, NoiseModel, gen_dataset
from data_processor import __version__
from data_processor.analyzer import ExclusionReport, VolatilityAnalyzer
from data_processor.descriptive_stats import collinearity_table, describe_dataset, histogram
from data_processor.design_matrix import DesignMatrix, ModelSpec, build_design
from data_processor.errors import ConfigError, VolatilityToolError
from data_processor.inference import quantile_profile
from data_processor.quantile_regression import fit_quantile
from data_processor.regression import FitResult, fit_ols
from data_processor.report_writer import (
    OutputFormat, ReportBundle, ReportMetadata, export_profile, render_coefficients, render_collinearity,
    render_descriptive, render_exclusions, render_fit_json, render_histogram, render_json, render_rejects,
    render_volatility, write_atomic,
)
from data_processor.run_config import INPUT_KEYS, RunConfig, resolve_config

logger = logging.getLogger(__name__)

COMMANDS = ("volatility", "describe", "fit", "profile", "synth", "pipeline")
COLLINEARITY_COLUMNS = ("distance_miles", "n_stops")


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for chunk in iter(lambda: file.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_run_manifest(config: RunConfig, command: str, outputs: Iterable[str], metadata: ReportMetadata,
                       with_inputs: bool = True) -> Path:
    """Write manifest.json: the command, config hash, SHA-256 of every input and the run's files."""
    inputs = {}
    for key in INPUT_KEYS if with_inputs else ():
        value = config.inputs.get(key)
        if value:
            inputs[key] = {"path": value, "sha256": file_digest(Path(value))}
    manifest = {
        "command": command,
        "config_hash": config.config_hash,
        "inputs": inputs,
        "outputs": sorted(outputs),
    }
    return write_atomic(Path(config.output_dir) / "manifest.json", render_json(manifest, metadata))


class VolatilityPipeline:
    """
    Runs one command of the tool: volatility, dataset assembly, descriptive
    statistics, model fits and quantile profiles, then writes every report and
    the run manifest.
    """

    def __init__(self, config: RunConfig):
        """Initialize the pipeline with a resolved run configuration."""
        self.config = config
        self.metadata = ReportMetadata(version=__version__, config_hash=config.config_hash)
        self.bundle = ReportBundle(self.metadata)
        settings = config.to_dict()
        self.cycle_collector = CycleCollector(settings)
        self.multi_source_collector = MultiSourceCollector(settings, threads=config.threads)
        self.analyzer = VolatilityAnalyzer(config.zero_policy, config.min_returns, config.threads)
        self.spec: ModelSpec = config.build_model_spec()
        self.fmt = config.output_format
        # data exports stay CSV unless JSON is requested
        self.data_fmt = OutputFormat.JSON if self.fmt is OutputFormat.JSON else OutputFormat.CSV

    def _input(self, key: str) -> Path:
        value = self.config.inputs.get(key)
        if not value:
            raise ConfigError(f"No '{key}' input given (set input.{key} or --{key})")
        return Path(value)

    def _name(self, stem: str, fmt: OutputFormat) -> str:
        return f"{stem}.{fmt.extension}"

    def compute_volatility(self) -> Tuple[Dict[str, float], ExclusionReport]:
        print("\n📈 Computing driving volatility from speed traces...")
        start_time = time.time()
        parsed = self.cycle_collector.parse_cycles(self._input("cycles"))
        volatilities, report = self.analyzer.trip_volatilities(parsed.cycles)
        self.bundle.add(self._name("volatility", self.data_fmt),
                        render_volatility(report, self.data_fmt, metadata=self.metadata))
        self.bundle.add(self._name("excluded_trips", self.data_fmt),
                        render_exclusions(report, self.data_fmt, metadata=self.metadata))
        self.bundle.add(self._name("cycle_rejects", self.data_fmt),
                        render_rejects(parsed.rejects, self.data_fmt, metadata=self.metadata))
        print(f"✅ {len(volatilities)} trips measured, {len(report.excluded)} excluded, "
              f"{len(parsed.rejects)} rows rejected ({time.time() - start_time:.1f}s)")
        return volatilities, report

    def build_dataset(self, volatilities: Dict[str, float]) -> List[AnalysisRow]:
        print("\n🔗 Joining trips, vehicles and drivers...")
        sources = {
            TableKind.TRIP: self._input("trips"),
            TableKind.VEHICLE: self._input("vehicles"),
            TableKind.PERSON: self._input("persons"),
        }
        tables = self.multi_source_collector.collect_all_tables(sources)
        for kind in TableKind:
            self.bundle.add(self._name(f"{kind.value}_rejects", self.data_fmt),
                            render_rejects(tables[kind].rejects, self.data_fmt, metadata=self.metadata))
        rows, join_report = self.multi_source_collector.join_dataset(
            volatilities, tables[TableKind.TRIP].records, tables[TableKind.VEHICLE].records,
            tables[TableKind.PERSON].records)
        rows, imputation = impute_means(rows)
        self.bundle.add("data_quality.json", render_json({
            "join": join_report.to_dict(),
            "imputation": imputation.to_dict(),
            "missing_cells": {kind.value: tables[kind].missing_cells for kind in TableKind},
        }, self.metadata))
        print(f"✅ {len(rows)} analysis rows, {join_report.total_unmatched} trips unmatched, "
              f"{imputation.total_imputed} cells imputed")
        return rows

    def build_design(self, rows: List[AnalysisRow]) -> DesignMatrix:
        return build_design(rows, self.spec)

    def describe(self, rows: List[AnalysisRow], design: DesignMatrix) -> None:
        print("\n📋 Describing the dataset...")
        table = describe_dataset(rows, dict(self.spec.labels) or None)
        self.bundle.add(self._name("descriptive", self.fmt),
                        render_descriptive(table, fmt=self.fmt, decimals=self.config.decimals,
                                           metadata=self.metadata))
        hist = histogram([row.volatility_pct for row in rows], self.config.binning)
        self.bundle.add(self._name("histogram", self.data_fmt),
                        render_histogram(hist, self.data_fmt, self.config.decimals, self.metadata))
        columns = [c for c in COLLINEARITY_COLUMNS if c in design.column_names]
        if len(columns) >= 1 and design.p >= 3:
            report = collinearity_table(design, columns)
            self.bundle.add(self._name("collinearity", self.fmt),
                            render_collinearity(report, self.fmt, self.config.decimals, self.metadata))
        print(f"✅ {len(table)} descriptive rows, {hist.n_bins} histogram bins")

    def fit_models(self, design: DesignMatrix, with_profile: bool) -> List[FitResult]:
        config = self.config
        fits: List[FitResult] = []
        if with_profile:
            print(f"\n🧮 Fitting the quantile profile over {list(config.quantiles)} "
                  f"({config.bootstrap} bootstrap resamples)...")
            profile = quantile_profile(design, config.quantiles, config.bootstrap, config.seed, config.threads)
            self.bundle.add(self._name("profile", self.data_fmt),
                            export_profile(profile, self.data_fmt, config.decimals, self.metadata))
            if config.models in ("ols", "both"):
                fits.append(profile.ols_fit)
            if config.models in ("quantile", "both"):
                fits.extend(profile.fits)
        else:
            print("\n🧮 Fitting models...")
            if config.models in ("ols", "both"):
                fits.append(fit_ols(design))
            if config.models in ("quantile", "both"):
                for i, q in enumerate(config.quantiles, start=1):
                    print(f"🔄 Quantile {q} ({i}/{len(config.quantiles)})")
                    fits.append(fit_quantile(design, q, config.bootstrap, config.seed, config.threads))
        self.bundle.add("fits.json", render_fit_json(fits, self.metadata))
        self.bundle.add(self._name("coefficients", self.fmt),
                        render_coefficients(fits, self.spec, self.fmt, config.decimals, self.metadata))
        print(f"✅ {len(fits)} models fitted")
        return fits

    def save_results(self, command: str) -> List[Path]:
        print("\n💾 Saving results...")
        output_dir = Path(self.config.output_dir)
        written = self.bundle.write(output_dir)
        written.append(write_run_manifest(self.config, command, self.bundle.files, self.metadata))
        print(f"📁 Files saved to: {output_dir}")
        return written

    def run(self, command: str) -> List[Path]:
        """Execute one command end to end and return the written files."""
        self.config.validate_paths()
        steps = {"volatility": 2, "describe": 4, "fit": 4, "profile": 4, "pipeline": 5}[command]
        print(f"\n🚀 Driving volatility: {command}")
        print(f"📊 Step 1/{steps}: volatility")
        volatilities, _ = self.compute_volatility()
        if command != "volatility":
            print(f"📊 Step 2/{steps}: dataset")
            rows = self.build_dataset(volatilities)
            design = self.build_design(rows)
            step = 3
            if command in ("describe", "pipeline"):
                print(f"📊 Step {step}/{steps}: describe")
                self.describe(rows, design)
                step += 1
            if command in ("fit", "profile", "pipeline"):
                print(f"📊 Step {step}/{steps}: models")
                self.fit_models(design, with_profile=command in ("profile", "pipeline"))
        print(f"📊 Step {steps}/{steps}: save")
        written = self.save_results(command)
        print(f"\n🎉 {command} complete: {len(written)} files written")
        return written


def run_synth(args: argparse.Namespace, config: RunConfig) -> List[Path]:
    print(f"\n🧪 Generating {args.trips_count} synthetic trips (seed {config.seed})...")
    noise = NoiseModel(NoiseKind(args.noise), args.noise_scale, args.noise_column)
    dataset = gen_dataset(args.trips_count, noise_model=noise, seed=config.seed,
                          spec=config.build_model_spec(), trips_per_vehicle=args.trips_per_vehicle,
                          max_seconds=args.max_seconds)
    written = list(dataset.write(config.output_dir).values())
    metadata = ReportMetadata(version=__version__, config_hash=config.config_hash)
    written.append(write_run_manifest(config, "synth", [path.name for path in written], metadata,
                                      with_inputs=False))
    print(f"📁 Files saved to: {config.output_dir}")
    return written


def _quantile_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated quantiles, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--cycles", help="Driver-cycles CSV (trip_id,t_sec,speed_mph)")
    common.add_argument("--trips", help="Trip summary CSV")
    common.add_argument("--vehicles", help="Vehicle CSV")
    common.add_argument("--persons", help="Person CSV")
    common.add_argument("--output-dir", help="Directory for reports")
    common.add_argument("--format", choices=[f.value for f in OutputFormat], help="Report format")
    common.add_argument("--threads", type=int, help="Worker threads (default: VOLATILITY_THREADS or 1)")
    common.add_argument("--seed", type=int, help="Bootstrap / generator seed")
    common.add_argument("--bootstrap", type=int, help="Bootstrap resamples per quantile")
    common.add_argument("--quantiles", type=_quantile_list, help="Comma-separated quantile grid")
    common.add_argument("--min-returns", type=int, help="Minimum usable returns per trip")
    common.add_argument("--zero-policy", choices=["drop_pair", "floor_epsilon", "error"],
                        help="Handling of zero-speed samples")
    common.add_argument("--models", choices=["ols", "quantile", "both"], help="Which models to fit")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(
        prog="main.py",
        description="Driving volatility from speed traces, with OLS and quantile regression reports.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "volatility": "per-trip volatility from the cycles file",
        "describe": "descriptive statistics, histogram and collinearity of the joined dataset",
        "fit": "OLS and/or quantile fits with a coefficient table",
        "profile": "quantile sweep with bootstrap bounds",
        "synth": "generate a seeded synthetic input set",
        "pipeline": "every stage in order",
    }
    for command in COMMANDS:
        sub = subparsers.add_parser(command, parents=[common], help=helps[command])
        if command == "synth":
            sub.add_argument("--trips-count", type=int, default=200, help="Number of trips to generate")
            sub.add_argument("--trips-per-vehicle", type=int, default=4)
            sub.add_argument("--max-seconds", type=int, default=1800, help="Cap on cycle length")
            sub.add_argument("--noise", choices=[k.value for k in NoiseKind], default="normal")
            sub.add_argument("--noise-scale", type=float, default=1.0)
            sub.add_argument("--noise-column", default=None, help="Design column for heteroskedastic noise")
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "input.cycles": args.cycles,
        "input.trips": args.trips,
        "input.vehicles": args.vehicles,
        "input.persons": args.persons,
        "output.dir": args.output_dir,
        "output.format": args.format,
        "runtime.threads": args.threads,
        "bootstrap.seed": args.seed,
        "bootstrap.resamples": args.bootstrap,
        "model.quantiles": args.quantiles,
        "model.fits": args.models,
        "volatility.min_returns": args.min_returns,
        "volatility.zero_policy": args.zero_policy,
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit status."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    try:
        config = resolve_config(args.config, overrides_from_args(args))
        if args.command == "synth":
            run_synth(args, config)
        else:
            VolatilityPipeline(config).run(args.command)
        return 0
    except KeyboardInterrupt:
        print("\n\n👋 Interrupted.")
        return 130
    except (VolatilityToolError, OSError) as e:
        print(f"\n❌ An error occurred: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
