"""
Descriptive statistics, histograms and collinearity diagnostics.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from data_collector.records import AnalysisRow, ENUM_COLUMNS
from .design_matrix import INTERCEPT, VARIABLE_LABELS, DesignMatrix
from .errors import (
    EmptyInputError, InfiniteVIFError, InsufficientDataError, ParameterError, UndefinedCorrelationError,
)
from .regression import fit_ols

logger = logging.getLogger(__name__)

VIF_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SummaryStats:
    n: int
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def n_bins(self) -> int:
        return len(self.counts)


class BinningKind(Enum):
    FREEDMAN_DIACONIS = "fd"
    FIXED_COUNT = "count"
    FIXED_WIDTH = "width"


@dataclass(frozen=True)
class Binning:
    kind: BinningKind = BinningKind.FREEDMAN_DIACONIS
    bins: Optional[int] = None
    width: Optional[float] = None

    def __post_init__(self):
        if self.kind is BinningKind.FIXED_COUNT and (self.bins is None or self.bins < 1):
            raise ParameterError(f"Fixed bin count must be >= 1, got {self.bins}")
        if self.kind is BinningKind.FIXED_WIDTH and (self.width is None or not self.width > 0):
            raise ParameterError(f"Fixed bin width must be positive, got {self.width}")

    @classmethod
    def fixed_count(cls, k: int) -> "Binning":
        return cls(BinningKind.FIXED_COUNT, bins=k)

    @classmethod
    def fixed_width(cls, w: float) -> "Binning":
        return cls(BinningKind.FIXED_WIDTH, width=w)


def _finite_array(values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyInputError("No values to summarize")
    if not np.all(np.isfinite(x)):
        raise ParameterError("Values must be finite")
    return x


def describe(values: Sequence[float]) -> SummaryStats:
    """Count, mean, sample standard deviation (0 for a single value), min and max."""
    x = _finite_array(values)
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return SummaryStats(n=int(x.size), mean=float(np.mean(x)), std=std,
                        min=float(np.min(x)), max=float(np.max(x)))


def histogram(values: Sequence[float], binning: Binning = Binning()) -> Histogram:
    """
    Bin the values; the last bin includes its right edge.

    Freedman-Diaconis on identical values falls back to one unit-width bin
    centered on the value.
    """
    x = _finite_array(values)
    lo, hi = float(x.min()), float(x.max())
    if binning.kind is BinningKind.FREEDMAN_DIACONIS:
        if lo == hi:
            edges = np.array([lo - 0.5, lo + 0.5])
        else:
            edges = np.histogram_bin_edges(x, bins="fd")
    elif binning.kind is BinningKind.FIXED_COUNT:
        edges = np.histogram_bin_edges(x, bins=binning.bins)
    else:
        m = max(1, math.ceil((hi - lo) / binning.width))
        if lo + m * binning.width < hi:
            m += 1
        edges = lo + binning.width * np.arange(m + 1)
    counts, edges = np.histogram(x, bins=edges)
    return Histogram(bin_edges=edges, counts=counts.astype(np.int64))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation, clipped to [-1, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("pearson needs two 1-d inputs of equal length")
    if x.size < 2:
        raise InsufficientDataError("pearson needs at least 2 pairs")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(xc @ xc)
    syy = float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("Correlation is undefined when an input has zero variance")
    return float(np.clip((xc @ yc) / math.sqrt(sxx * syy), -1.0, 1.0))


def _column_position(design: DesignMatrix, column: Union[int, str]) -> int:
    j = design.column_names.index(column) if isinstance(column, str) else int(column)
    if not 1 <= j < design.p:
        raise ParameterError(f"VIF column must be a predictor column, got {column!r}")
    return j


def vif(design: DesignMatrix, column_index: Union[int, str]) -> float:
    """
    Variance inflation factor of one predictor, from an OLS of that predictor on
    the others (intercept included).

    Raises:
        InfiniteVIFError: the predictor is a linear combination of the others
    """
    if design.p < 3:
        raise ParameterError("VIF needs at least two predictor columns besides the intercept")
    j = _column_position(design, column_index)
    name = design.column_names[j]
    target = design.X[:, j]
    if np.all(target == target[0]):
        raise ParameterError(f"Column '{name}' has zero variance")
    others = [i for i in range(design.p) if i != j]
    auxiliary = DesignMatrix(tuple(design.column_names[i] for i in others), design.X[:, others],
                             target, design.row_keys)
    r2 = fit_ols(auxiliary).fit_measure
    if 1.0 - r2 <= VIF_TOLERANCE:
        raise InfiniteVIFError(name)
    return 1.0 / (1.0 - r2)


@dataclass(frozen=True)
class DescriptiveRow:
    variable: str
    label: str
    unit: str
    stats: SummaryStats


TRIP_VARIABLES = ("volatility_pct", "distance_miles", "travel_time_min", "avg_speed_mph",
                  "n_stops", "grade_stddev")
VEHICLE_VARIABLES = ("is_afv", "body_type", "transmission", "vehicle_age_years", "n_cylinders",
                     "powertrain", "ownership_nonowned")
DRIVER_VARIABLES = ("is_female", "age_band", "not_employed")


def _unique_by(rows: Sequence[AnalysisRow], key: Callable[[AnalysisRow], Tuple]) -> List[AnalysisRow]:
    seen = {}
    for row in rows:
        seen.setdefault(key(row), row)
    return list(seen.values())


def _variable_rows(name: str, unit: str, units: Sequence[AnalysisRow],
                   labels: Dict[str, str]) -> List[DescriptiveRow]:
    observed = [row.value(name) for row in units if row.value(name) is not None]
    if not observed:
        logger.warning(f"No observed values for '{name}'; omitted from the descriptive table")
        return []
    if name in ENUM_COLUMNS:
        # one share row per category, as 0/1 indicators
        out = []
        for category in ENUM_COLUMNS[name]:
            shares = [1.0 if value is category else 0.0 for value in observed]
            out.append(DescriptiveRow(f"{name}[{category.value}]",
                                      f"{labels.get(name, name)}: {category.value}", unit, describe(shares)))
        return out
    values = [float(value) for value in observed]
    return [DescriptiveRow(name, labels.get(name, name), unit, describe(values))]


def describe_dataset(rows: Sequence[AnalysisRow],
                     labels: Optional[Dict[str, str]] = None) -> List[DescriptiveRow]:
    """
    Summary statistics of every analysis variable over its unit of observation.

    Trip variables are summarized over trips, vehicle variables over distinct
    vehicles and driver variables over distinct drivers. Categorical variables
    become one share row per category.
    """
    if not rows:
        raise EmptyInputError("No analysis rows to describe")
    labels = labels or VARIABLE_LABELS
    vehicles = _unique_by(rows, lambda r: (r.vehicle_id,))
    drivers = _unique_by(rows, lambda r: (r.household_id, r.person_id))
    table = []
    for name in TRIP_VARIABLES:
        table.extend(_variable_rows(name, "trips", rows, labels))
    for name in VEHICLE_VARIABLES:
        table.extend(_variable_rows(name, "vehicles", vehicles, labels))
    for name in DRIVER_VARIABLES:
        table.extend(_variable_rows(name, "drivers", drivers, labels))
    logger.info(f"Described {len(table)} variables over {len(rows)} trips, "
                f"{len(vehicles)} vehicles and {len(drivers)} drivers")
    return table


@dataclass
class CollinearityReport:
    columns: Tuple[str, ...]
    correlations: Dict[Tuple[str, str], float] = field(default_factory=dict)
    vifs: Dict[str, float] = field(default_factory=dict)


def collinearity_table(design: DesignMatrix, columns: Optional[Sequence[str]] = None) -> CollinearityReport:
    """
    Pairwise correlations and VIFs of the named predictors within the full design.

    Undefined correlations are NaN and perfect collinearity gives an infinite VIF;
    both are logged instead of raised.
    """
    names = tuple(columns) if columns else tuple(n for n in design.column_names if n != INTERCEPT)
    report = CollinearityReport(columns=names)
    for i, first in enumerate(names):
        for second in names[i + 1:]:
            try:
                r = pearson(design.column(first), design.column(second))
            except UndefinedCorrelationError:
                logger.warning(f"Correlation of '{first}' and '{second}' is undefined")
                r = float("nan")
            report.correlations[(first, second)] = r
    for name in names:
        try:
            report.vifs[name] = vif(design, name)
        except InfiniteVIFError:
            logger.warning(f"Column '{name}' is perfectly collinear; VIF is infinite")
            report.vifs[name] = math.inf
        except ParameterError as e:
            logger.warning(f"VIF of '{name}' skipped: {e}")
            report.vifs[name] = float("nan")
    return report
