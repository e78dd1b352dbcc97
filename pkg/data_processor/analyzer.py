"""
Driving volatility from second-by-second speed traces.

Each trip's volatility is the sample standard deviation (n-1 divisor) of its
percent log speed returns r_i = 100 * ln(x_i / x_{i-1}).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from data_collector.records import DrivingCycle
from .errors import InsufficientDataError, ParameterError, TripExcludedError, ZeroSpeedError

logger = logging.getLogger(__name__)

DEFAULT_MIN_RETURNS = 10


class ZeroSpeedMode(Enum):
    DROP_PAIR = "drop_pair"
    FLOOR_EPSILON = "floor_epsilon"
    ERROR = "error"


@dataclass(frozen=True)
class ZeroSpeedPolicy:
    mode: ZeroSpeedMode = ZeroSpeedMode.DROP_PAIR
    epsilon_mph: float = 0.1

    def __post_init__(self):
        if not self.epsilon_mph > 0:
            raise ParameterError(f"epsilon_mph must be positive, got {self.epsilon_mph}")


@dataclass(frozen=True, eq=False)
class LogReturnSeries:
    trip_id: str
    returns: np.ndarray
    n_dropped_zero: int = 0

    def __len__(self) -> int:
        return len(self.returns)


def log_returns(speeds: Sequence[float], policy: ZeroSpeedPolicy = ZeroSpeedPolicy(),
                trip_id: str = "") -> LogReturnSeries:
    """
    Percent log returns between consecutive speeds.

    Args:
        speeds: ordered speeds (>= 0)
        policy: how pairs touching a zero speed are handled
        trip_id: carried onto the series

    Returns:
        LogReturnSeries with one return per usable pair
    """
    x = np.asarray(speeds, dtype=float)
    if x.size < 2:
        raise InsufficientDataError(f"Need at least 2 speeds to form a return, got {x.size}")

    if policy.mode is ZeroSpeedMode.ERROR:
        bad = np.flatnonzero(x <= 0)
        if bad.size:
            raise ZeroSpeedError(int(bad[0]), float(x[bad[0]]))
    elif policy.mode is ZeroSpeedMode.FLOOR_EPSILON:
        x = np.maximum(x, policy.epsilon_mph)

    previous, current = x[:-1], x[1:]
    usable = (previous > 0) & (current > 0)
    returns = np.log(current[usable] / previous[usable]) * 100.0
    return LogReturnSeries(trip_id=trip_id, returns=returns, n_dropped_zero=int((~usable).sum()))


def volatility(returns: LogReturnSeries, min_returns: int = 2) -> float:
    """Two-pass sample standard deviation of the returns, in percent."""
    if min_returns < 2:
        raise ParameterError(f"min_returns must be at least 2, got {min_returns}")
    r = returns.returns
    if len(r) < min_returns:
        reason = "all_zero_dropped" if len(r) + returns.n_dropped_zero >= min_returns else "too_short"
        raise TripExcludedError(reason, f"Trip {returns.trip_id!r} has {len(r)} returns, "
                                        f"fewer than the required {min_returns}")
    mean = r.sum() / len(r)
    deviations = r - mean
    return float(math.sqrt(float(deviations @ deviations) / (len(r) - 1)))


class RunningVolatility:
    """Single-pass (Welford) accumulator of the same statistic."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def push(self, value: float) -> None:
        self.count += 1
        delta = value - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (value - self.mean)

    def extend(self, values: Iterable[float]) -> "RunningVolatility":
        for value in values:
            self.push(float(value))
        return self

    @property
    def value(self) -> float:
        if self.count < 2:
            raise InsufficientDataError("Need at least 2 returns for a standard deviation")
        return math.sqrt(max(self._m2, 0.0) / (self.count - 1))


@dataclass(frozen=True)
class TripVolatility:
    trip_id: str
    volatility_pct: float
    n_returns: int
    n_dropped_zero: int


@dataclass
class ExclusionReport:
    excluded: List[Tuple[str, str]] = field(default_factory=list)
    details: Dict[str, TripVolatility] = field(default_factory=dict)

    def reasons(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for _, reason in self.excluded:
            counts[reason] = counts.get(reason, 0) + 1
        return counts


class VolatilityAnalyzer:
    """Computes driving volatility for every trip of a cycles file."""

    def __init__(self, policy: Optional[ZeroSpeedPolicy] = None,
                 min_returns: int = DEFAULT_MIN_RETURNS, threads: int = 1):
        if min_returns < 2:
            raise ParameterError(f"min_returns must be at least 2, got {min_returns}")
        self.policy = policy or ZeroSpeedPolicy()
        self.min_returns = min_returns
        self.threads = max(1, threads)

    def analyze_trip(self, cycle: DrivingCycle) -> TripVolatility:
        """
        Volatility of one trip.

        Raises:
            TripExcludedError: too few usable returns or a zero speed under the Error policy
        """
        if len(cycle) < 2:
            raise TripExcludedError("too_short", f"Trip {cycle.trip_id!r} has a single sample")
        try:
            series = log_returns(cycle.speed, self.policy, trip_id=cycle.trip_id)
        except ZeroSpeedError as e:
            raise TripExcludedError("zero_speed", f"Trip {cycle.trip_id!r}: {e}") from e
        if len(cycle) - 1 < self.min_returns:
            raise TripExcludedError("too_short", f"Trip {cycle.trip_id!r} has {len(cycle)} samples")
        value = volatility(series, self.min_returns)
        return TripVolatility(cycle.trip_id, value, len(series), series.n_dropped_zero)

    def _analyze_or_exclude(self, cycle: DrivingCycle):
        try:
            return self.analyze_trip(cycle)
        except TripExcludedError as e:
            return (cycle.trip_id, e.reason)

    def trip_volatilities(self, cycles: Iterable[DrivingCycle]) -> Tuple[Dict[str, float], ExclusionReport]:
        """
        Analyze every cycle, recording excluded trips instead of failing.

        Args:
            cycles: driving cycles, any order

        Returns:
            trip id -> volatility (sorted by trip id) and the exclusion report
        """
        cycles = list(cycles)
        if self.threads > 1 and len(cycles) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                outcomes = list(pool.map(self._analyze_or_exclude, cycles))
        else:
            outcomes = [self._analyze_or_exclude(cycle) for cycle in cycles]

        report = ExclusionReport()
        for outcome in outcomes:
            if isinstance(outcome, TripVolatility):
                report.details[outcome.trip_id] = outcome
            else:
                report.excluded.append(outcome)
        report.excluded.sort()
        report.details = {trip_id: report.details[trip_id] for trip_id in sorted(report.details)}
        volatilities = {trip_id: detail.volatility_pct for trip_id, detail in report.details.items()}

        if report.excluded:
            logger.warning(f"Excluded {len(report.excluded)} trips: {report.reasons()}")
        logger.info(f"Computed volatility for {len(volatilities)} trips")
        return volatilities, report
