"""
Run configuration: YAML file, environment default and command-line overrides.

Precedence, lowest first: built-in defaults, the VOLATILITY_THREADS environment
variable (thread count only), the config file, command-line flags.
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from .analyzer import DEFAULT_MIN_RETURNS, ZeroSpeedMode, ZeroSpeedPolicy
from .descriptive_stats import Binning, BinningKind
from .design_matrix import DEFAULT_QUANTILES, ModelSpec, published_model_spec, validate_quantiles
from .errors import ConfigError, ParameterError
from .quantile_regression import DEFAULT_BOOTSTRAP
from .report_writer import DEFAULT_DECIMALS, OutputFormat

logger = logging.getLogger(__name__)

THREADS_ENV = "VOLATILITY_THREADS"
INPUT_KEYS = ("cycles", "trips", "vehicles", "persons")
MODEL_CHOICES = ("ols", "quantile", "both")
SECTIONS = ("input", "schema", "volatility", "model", "bootstrap", "histogram", "output", "runtime")


def load_config_file(config_path: Union[str, Path]) -> Dict[str, Any]:
    """Load a YAML configuration file; it must hold a mapping."""
    path = Path(config_path)
    try:
        with open(path, "r", encoding="utf-8") as file:
            config = yaml.safe_load(file)
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {e}") from e
    if config is None:
        raise ConfigError(f"Config file {path} is empty")
    if not isinstance(config, dict):
        raise ConfigError(f"Config file {path} must contain a mapping")
    return config


def _merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict) and key != "spec":
            _merge(base[key], value)
        else:
            base[key] = copy.deepcopy(value)
    return base


@dataclass
class RunConfig:
    """Every setting of one run. `to_dict` and `from_dict` are exact inverses."""
    inputs: Dict[str, Optional[str]] = field(default_factory=lambda: {key: None for key in INPUT_KEYS})
    schema: Dict[str, Dict[str, str]] = field(default_factory=dict)
    zero_policy: ZeroSpeedPolicy = field(default_factory=ZeroSpeedPolicy)
    min_returns: int = DEFAULT_MIN_RETURNS
    model_spec: Union[str, Dict[str, Any]] = "published"
    quantiles: tuple = DEFAULT_QUANTILES
    models: str = "both"
    bootstrap: int = DEFAULT_BOOTSTRAP
    seed: int = 0
    binning: Binning = field(default_factory=Binning)
    output_dir: str = "output"
    output_format: OutputFormat = OutputFormat.TEXT
    decimals: int = DEFAULT_DECIMALS
    threads: int = 1

    def __post_init__(self):
        try:
            self.quantiles = validate_quantiles(self.quantiles)
        except ParameterError as e:
            raise ConfigError(str(e)) from e
        if self.models not in MODEL_CHOICES:
            raise ConfigError(f"model.fits must be one of {MODEL_CHOICES}, got {self.models!r}")
        if self.bootstrap < 1:
            raise ConfigError(f"bootstrap.resamples must be >= 1, got {self.bootstrap}")
        if self.seed < 0:
            raise ConfigError(f"bootstrap.seed must be non-negative, got {self.seed}")
        if self.min_returns < 2:
            raise ConfigError(f"volatility.min_returns must be >= 2, got {self.min_returns}")
        if self.threads < 1:
            raise ConfigError(f"runtime.threads must be >= 1, got {self.threads}")
        if self.decimals < 0:
            raise ConfigError(f"output.decimals must be >= 0, got {self.decimals}")
        unknown = set(self.inputs) - set(INPUT_KEYS)
        if unknown:
            raise ConfigError(f"Unknown input keys: {sorted(unknown)}")

    def build_model_spec(self) -> ModelSpec:
        """The configured model with the configured quantile grid."""
        if self.model_spec == "published":
            return published_model_spec(self.quantiles)
        if not isinstance(self.model_spec, Mapping):
            raise ConfigError(f"model.spec must be 'published' or a mapping, got {self.model_spec!r}")
        try:
            return ModelSpec.from_dict({**self.model_spec, "quantiles": list(self.quantiles)})
        except (KeyError, TypeError, ParameterError) as e:
            raise ConfigError(f"Invalid model.spec: {e}") from e

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input": dict(self.inputs),
            "schema": copy.deepcopy(self.schema),
            "volatility": {
                "zero_policy": self.zero_policy.mode.value,
                "epsilon_mph": self.zero_policy.epsilon_mph,
                "min_returns": self.min_returns,
            },
            "model": {
                "spec": copy.deepcopy(self.model_spec),
                "quantiles": list(self.quantiles),
                "fits": self.models,
            },
            "bootstrap": {"resamples": self.bootstrap, "seed": self.seed},
            "histogram": {"binning": self.binning.kind.value, "bins": self.binning.bins,
                          "width": self.binning.width},
            "output": {"dir": self.output_dir, "format": self.output_format.value, "decimals": self.decimals},
            "runtime": {"threads": self.threads},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"Unknown config sections: {sorted(unknown)}")
        section = {name: data.get(name) or {} for name in SECTIONS}
        try:
            volatility = section["volatility"]
            model = section["model"]
            histogram = section["histogram"]
            inputs = {key: None for key in INPUT_KEYS}
            inputs.update(section["input"])
            return cls(
                inputs=inputs,
                schema=copy.deepcopy(dict(section["schema"])),
                zero_policy=ZeroSpeedPolicy(ZeroSpeedMode(volatility.get("zero_policy", "drop_pair")),
                                            float(volatility.get("epsilon_mph", 0.1))),
                min_returns=int(volatility.get("min_returns", DEFAULT_MIN_RETURNS)),
                model_spec=copy.deepcopy(model.get("spec", "published")),
                quantiles=tuple(float(q) for q in model.get("quantiles", DEFAULT_QUANTILES)),
                models=model.get("fits", "both"),
                bootstrap=int(section["bootstrap"].get("resamples", DEFAULT_BOOTSTRAP)),
                seed=int(section["bootstrap"].get("seed", 0)),
                binning=Binning(BinningKind(histogram.get("binning", "fd")), histogram.get("bins"),
                                histogram.get("width")),
                output_dir=str(section["output"].get("dir", "output")),
                output_format=OutputFormat(section["output"].get("format", "text")),
                decimals=int(section["output"].get("decimals", DEFAULT_DECIMALS)),
                threads=int(section["runtime"].get("threads", 1)),
            )
        except (ValueError, TypeError, AttributeError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Invalid configuration: {e}") from e

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @property
    def config_hash(self) -> str:
        """SHA-256 of the settings that shape results (threads and output directory excluded)."""
        content = self.to_dict()
        content.pop("runtime")
        content["output"].pop("dir")
        canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def validate_paths(self) -> None:
        """Inputs must exist and must not live inside the output directory."""
        output_dir = Path(self.output_dir).resolve()
        for key, value in self.inputs.items():
            if value is None:
                continue
            path = Path(value).resolve()
            if not path.is_file():
                raise ConfigError(f"Input file for '{key}' not found: {value}")
            if output_dir == path or output_dir in path.parents:
                raise ConfigError(f"Input file for '{key}' lies inside the output directory {self.output_dir}")


def resolve_config(config_path: Optional[Union[str, Path]] = None,
                   overrides: Optional[Mapping[str, Any]] = None,
                   environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """
    Build the run configuration from every layer.

    Args:
        config_path: optional YAML file
        overrides: dotted keys ("bootstrap.seed") set from command-line flags; None values are skipped
        environ: environment mapping, os.environ by default

    Returns:
        RunConfig
    """
    data = RunConfig().to_dict()
    environ = os.environ if environ is None else environ
    if environ.get(THREADS_ENV):
        try:
            data["runtime"]["threads"] = int(environ[THREADS_ENV])
        except ValueError as e:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {environ[THREADS_ENV]!r}") from e
    if config_path is not None:
        _merge(data, load_config_file(config_path))
        logger.info(f"Loaded configuration from {config_path}")
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        data.setdefault(section, {})[key] = value
    return RunConfig.from_dict(data)
