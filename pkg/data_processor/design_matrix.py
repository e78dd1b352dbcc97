import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from data_collector.records import AnalysisRow, BodyType, AgeBand, Powertrain, Transmission
from .errors import DesignError, ParameterError

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"
DEFAULT_QUANTILES: Tuple[float, ...] = (0.1, 0.25, 0.5, 0.75, 0.9)


def category_label(value: Any) -> Optional[str]:
    """The string a row value is matched against in a categorical term."""
    if value is None:
        return None
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, bool):
        return "1" if value else "0"
    return str(value)


def validate_quantiles(quantiles: Sequence[float]) -> Tuple[float, ...]:
    grid = tuple(float(q) for q in quantiles)
    if not grid:
        raise ParameterError("Quantile grid is empty")
    if any(not (0.0 < q < 1.0) for q in grid):
        raise ParameterError(f"Quantiles must lie strictly inside (0, 1): {list(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError(f"Quantiles must be strictly increasing without duplicates: {list(grid)}")
    return grid


@dataclass(frozen=True)
class CategoricalTerm:
    column: str
    categories: Tuple[str, ...]
    base: str

    def __post_init__(self):
        if len(set(self.categories)) != len(self.categories):
            raise ParameterError(f"Categories of '{self.column}' repeat")
        if self.base not in self.categories:
            raise ParameterError(f"Base '{self.base}' is not a category of '{self.column}'")

    @property
    def dummies(self) -> Tuple[str, ...]:
        return tuple(c for c in self.categories if c != self.base)


def dummy_name(column: str, category: str) -> str:
    return f"{column}[{category}]"


@dataclass(frozen=True)
class ModelSpec:
    """Declarative model: response, continuous terms, dummy-coded terms, quantile grid."""
    dependent: str = "volatility_pct"
    continuous: Tuple[str, ...] = ()
    categorical: Tuple[CategoricalTerm, ...] = ()
    quantiles: Tuple[float, ...] = DEFAULT_QUANTILES
    # presentation only: term order and display labels for reports
    term_order: Tuple[str, ...] = ()
    labels: Mapping[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "quantiles", validate_quantiles(self.quantiles))
        terms = list(self.continuous) + [t.column for t in self.categorical]
        if len(set(terms)) != len(terms):
            raise ParameterError("A column appears in more than one model term")
        if self.term_order and sorted(self.term_order) != sorted(terms):
            raise ParameterError("term_order must list every model term exactly once")

    @property
    def column_names(self) -> Tuple[str, ...]:
        names = [INTERCEPT] + list(self.continuous)
        for term in self.categorical:
            names.extend(dummy_name(term.column, c) for c in term.dummies)
        return tuple(names)

    def ordered_terms(self) -> Tuple[str, ...]:
        return self.term_order or tuple(self.continuous) + tuple(t.column for t in self.categorical)

    def term(self, column: str) -> Optional[CategoricalTerm]:
        for term in self.categorical:
            if term.column == column:
                return term
        return None

    def label(self, name: str) -> str:
        return self.labels.get(name, name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dependent": self.dependent,
            "continuous": list(self.continuous),
            "categorical": [
                {"column": t.column, "categories": list(t.categories), "base": t.base}
                for t in self.categorical
            ],
            "quantiles": list(self.quantiles),
            "term_order": list(self.term_order),
            "labels": dict(self.labels),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelSpec":
        return cls(
            dependent=data.get("dependent", "volatility_pct"),
            continuous=tuple(data.get("continuous", ())),
            categorical=tuple(
                CategoricalTerm(t["column"], tuple(str(c) for c in t["categories"]), str(t["base"]))
                for t in data.get("categorical", ())
            ),
            quantiles=tuple(data.get("quantiles", DEFAULT_QUANTILES)),
            term_order=tuple(data.get("term_order", ())),
            labels=dict(data.get("labels", {})),
        )


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    column_names: Tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    row_keys: Tuple[str, ...]

    def __post_init__(self):
        n, p = self.X.shape
        if len(self.column_names) != p or self.y.shape != (n,) or len(self.row_keys) != n:
            raise DesignError("Design matrix dimensions disagree with its column names, response or keys")
        if not self.column_names or self.column_names[0] != INTERCEPT or not np.all(self.X[:, 0] == 1.0):
            raise DesignError("The first design column must be an all-ones intercept")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.column_names.index(name)]

    def with_response(self, y: np.ndarray) -> "DesignMatrix":
        return DesignMatrix(self.column_names, self.X, np.asarray(y, dtype=float), self.row_keys)

    def with_columns(self, X: np.ndarray) -> "DesignMatrix":
        return DesignMatrix(self.column_names, np.asarray(X, dtype=float), self.y, self.row_keys)


def design_from_arrays(X: np.ndarray, y: np.ndarray, names: Optional[Sequence[str]] = None,
                       add_intercept: bool = True) -> DesignMatrix:
    """Wrap raw arrays (regressors without intercept) as a DesignMatrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if add_intercept:
        X = np.column_stack([np.ones(n), X])
    if names is None:
        names = [f"x{j}" for j in range(1, X.shape[1])]
    return DesignMatrix((INTERCEPT,) + tuple(names), X, np.asarray(y, dtype=float),
                        tuple(str(i) for i in range(n)))


def _numeric_cell(row: AnalysisRow, column: str) -> float:
    value = row.value(column)
    if value is None:
        raise DesignError(f"Row {row.trip_id!r}: column '{column}' is missing")
    value = float(value)
    if not math.isfinite(value):
        raise DesignError(f"Row {row.trip_id!r}: column '{column}' is not finite")
    return value


def build_design(rows: Sequence[AnalysisRow], spec: ModelSpec) -> DesignMatrix:
    """
    Dummy-code the rows into a numeric design.

    Column order: intercept, continuous terms as declared, then for each categorical
    term its non-base categories as declared.

    Raises:
        DesignError: no rows, a missing cell, or a category outside the declared list
    """
    if not rows:
        raise DesignError("Cannot build a design matrix from zero rows")
    try:
        for name in (spec.dependent,) + spec.continuous + tuple(t.column for t in spec.categorical):
            rows[0].value(name)
    except KeyError as e:
        raise DesignError(str(e)) from e

    n = len(rows)
    names = spec.column_names
    X = np.zeros((n, len(names)))
    X[:, 0] = 1.0
    y = np.empty(n)
    offsets = {}
    col = 1 + len(spec.continuous)
    for term in spec.categorical:
        offsets[term.column] = {c: col + k for k, c in enumerate(term.dummies)}
        col += len(term.dummies)

    for i, row in enumerate(rows):
        y[i] = _numeric_cell(row, spec.dependent)
        for j, column in enumerate(spec.continuous, start=1):
            X[i, j] = _numeric_cell(row, column)
        for term in spec.categorical:
            label = category_label(row.value(term.column))
            if label not in term.categories:
                raise DesignError(f"Row {row.trip_id!r}: column '{term.column}' has category "
                                  f"{label!r} outside {list(term.categories)}")
            if label != term.base:
                X[i, offsets[term.column][label]] = 1.0

    logger.info(f"Built {n} x {len(names)} design matrix")
    return DesignMatrix(names, X, y, tuple(row.trip_id for row in rows))


BODY_LABELS = {
    BodyType.SEDAN: "Sedan", BodyType.SUV: "SUV", BodyType.PICKUP: "Pickup", BodyType.COUPE: "Coupe",
    BodyType.CONVERTIBLE: "Convertible", BodyType.HATCHBACK: "Hatchback", BodyType.WAGON: "Wagon",
    BodyType.MINIVAN: "Minivan", BodyType.VAN: "Van", BodyType.OTHER: "Other",
}
TRANSMISSION_LABELS = {Transmission.AUTOMATIC: "Automatic", Transmission.MANUAL: "Manual",
                       Transmission.BOTH: "Both"}
POWERTRAIN_LABELS = {Powertrain.FRONT_WHEEL: "Front-wheel drive", Powertrain.REAR_WHEEL: "Rear-wheel",
                     Powertrain.FOUR_WHEEL: "Four-wheel"}
AGE_LABELS = {band: f"{band.lower_years}-{band.lower_years + 9}" for band in AgeBand}

VARIABLE_LABELS: Dict[str, str] = {
    "volatility_pct": "Driving Volatility",
    "distance_miles": "Distance traveled (miles)",
    "travel_time_min": "Travel time (min)",
    "avg_speed_mph": "Average speed (mph)",
    "n_stops": "No. of stops",
    "grade_stddev": "Std. dev. of road grade",
    "is_afv": "AFV",
    "body_type": "Body type",
    "transmission": "Transmission",
    "vehicle_age_years": "Vehicle age",
    "n_cylinders": "No. of cylinders",
    "powertrain": "Power train",
    "ownership_nonowned": "Ownership (non-owned=1)",
    "is_female": "Gender (Female=1)",
    "age_band": "Age",
    "not_employed": "Employment (no=1)",
    INTERCEPT: "Constant",
}


def _enum_term(column: str, enum_labels: Mapping[Enum, str], base: Enum) -> Tuple[CategoricalTerm, Dict[str, str]]:
    members = list(enum_labels)
    term = CategoricalTerm(column, tuple(m.value for m in members), base.value)
    labels = {dummy_name(column, m.value): enum_labels[m] for m in members}
    labels[f"{column}.base"] = enum_labels[base]
    return term, labels


def published_model_spec(quantiles: Sequence[float] = DEFAULT_QUANTILES) -> ModelSpec:
    """The published volatility model: vehicle, trip and driver covariates with their base categories."""
    labels = dict(VARIABLE_LABELS)
    body, body_labels = _enum_term("body_type", BODY_LABELS, BodyType.SEDAN)
    transmission, transmission_labels = _enum_term("transmission", TRANSMISSION_LABELS, Transmission.AUTOMATIC)
    powertrain, powertrain_labels = _enum_term("powertrain", POWERTRAIN_LABELS, Powertrain.FRONT_WHEEL)
    age, age_labels = _enum_term("age_band", AGE_LABELS, AgeBand.A10_19)
    for extra in (body_labels, transmission_labels, powertrain_labels, age_labels):
        labels.update(extra)
    labels["age_band.base"] = "10-19 years"
    return ModelSpec(
        dependent="volatility_pct",
        continuous=("is_afv", "vehicle_age_years", "n_cylinders", "distance_miles", "n_stops",
                    "grade_stddev", "is_female", "ownership_nonowned", "not_employed"),
        categorical=(body, transmission, powertrain, age),
        quantiles=tuple(quantiles),
        term_order=("is_afv", "body_type", "transmission", "vehicle_age_years", "n_cylinders",
                    "powertrain", "distance_miles", "n_stops", "grade_stddev", "is_female",
                    "age_band", "ownership_nonowned", "not_employed"),
        labels=labels,
    )
