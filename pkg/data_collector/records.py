"""
Domain records for the four survey tables and the joined analysis dataset.

Category enums keep their declaration order; that order is the tie-break for mode
imputation and the column order of dummy coding.
"""

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

import numpy as np


class TableKind(Enum):
    TRIP = "trip"
    VEHICLE = "vehicle"
    PERSON = "person"


class BodyType(Enum):
    SEDAN = "Sedan"
    SUV = "SUV"
    PICKUP = "Pickup"
    COUPE = "Coupe"
    CONVERTIBLE = "Convertible"
    HATCHBACK = "Hatchback"
    WAGON = "Wagon"
    MINIVAN = "Minivan"
    VAN = "Van"
    OTHER = "Other"


class Transmission(Enum):
    AUTOMATIC = "Automatic"
    MANUAL = "Manual"
    BOTH = "Both"


class Powertrain(Enum):
    FRONT_WHEEL = "FrontWheel"
    REAR_WHEEL = "RearWheel"
    FOUR_WHEEL = "FourWheel"


class AgeBand(Enum):
    A10_19 = "A10_19"
    A20_29 = "A20_29"
    A30_39 = "A30_39"
    A40_49 = "A40_49"
    A50_59 = "A50_59"
    A60_69 = "A60_69"
    A70_79 = "A70_79"
    A80_89 = "A80_89"

    @property
    def lower_years(self) -> int:
        return int(self.value[1:3])

    @classmethod
    def from_years(cls, age_years: int) -> Optional["AgeBand"]:
        """Band an age in years; ages outside 10-89 have no band."""
        if age_years < 10 or age_years > 89:
            return None
        decade = (age_years // 10) * 10
        return cls(f"A{decade}_{decade + 9}")


# CSV codes of the vehicle table -> enum members
BODY_CODES: Dict[str, BodyType] = {
    "sedan": BodyType.SEDAN,
    "suv": BodyType.SUV,
    "pickup": BodyType.PICKUP,
    "coupe": BodyType.COUPE,
    "convertible": BodyType.CONVERTIBLE,
    "hatchback": BodyType.HATCHBACK,
    "wagon": BodyType.WAGON,
    "minivan": BodyType.MINIVAN,
    "van": BodyType.VAN,
    "other": BodyType.OTHER,
}
TRANSMISSION_CODES: Dict[str, Transmission] = {
    "auto": Transmission.AUTOMATIC,
    "manual": Transmission.MANUAL,
    "both": Transmission.BOTH,
}
POWERTRAIN_CODES: Dict[str, Powertrain] = {
    "fwd": Powertrain.FRONT_WHEEL,
    "rwd": Powertrain.REAR_WHEEL,
    "4wd": Powertrain.FOUR_WHEEL,
}


@dataclass(frozen=True)
class SpeedSample:
    trip_id: str
    t: int
    speed: float


@dataclass(frozen=True, eq=False)
class DrivingCycle:
    """One trip's 1 Hz speed trace, stored column-wise."""
    trip_id: str
    t: np.ndarray
    speed: np.ndarray

    def __post_init__(self):
        if len(self.t) != len(self.speed):
            raise ValueError("t and speed must have the same length")
        if len(self.t) < 1:
            raise ValueError(f"Driving cycle {self.trip_id} has no samples")

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DrivingCycle):
            return NotImplemented
        return (self.trip_id == other.trip_id
                and np.array_equal(self.t, other.t)
                and np.array_equal(self.speed, other.speed))

    @property
    def samples(self) -> Iterator[SpeedSample]:
        for t, speed in zip(self.t, self.speed):
            yield SpeedSample(self.trip_id, int(t), float(speed))


@dataclass(frozen=True)
class TripSummary:
    trip_id: str
    household_id: str
    vehicle_id: str
    distance_miles: Optional[float]
    travel_time_min: Optional[float]
    avg_speed_mph: Optional[float]
    n_stops: Optional[int]
    grade_stddev: Optional[float]


@dataclass(frozen=True)
class VehicleRecord:
    vehicle_id: str
    household_id: str
    driver_person_id: str
    is_afv: Optional[bool]
    body_type: Optional[BodyType]
    transmission: Optional[Transmission]
    vehicle_age_years: Optional[float]
    n_cylinders: Optional[int]
    powertrain: Optional[Powertrain]
    ownership_nonowned: Optional[bool]


@dataclass(frozen=True)
class PersonRecord:
    person_id: str
    household_id: str
    is_female: Optional[bool]
    age_band: Optional[AgeBand]
    not_employed: Optional[bool]


@dataclass(frozen=True)
class AnalysisRow:
    """One trip joined to its vehicle and driver. None marks a missing cell."""
    trip_id: str
    household_id: str
    vehicle_id: str
    person_id: str
    volatility_pct: float
    distance_miles: Optional[float] = None
    travel_time_min: Optional[float] = None
    avg_speed_mph: Optional[float] = None
    n_stops: Optional[float] = None
    grade_stddev: Optional[float] = None
    is_afv: Optional[bool] = None
    body_type: Optional[BodyType] = None
    transmission: Optional[Transmission] = None
    vehicle_age_years: Optional[float] = None
    n_cylinders: Optional[float] = None
    powertrain: Optional[Powertrain] = None
    ownership_nonowned: Optional[bool] = None
    is_female: Optional[bool] = None
    age_band: Optional[AgeBand] = None
    not_employed: Optional[bool] = None
    imputed_flags: FrozenSet[str] = field(default_factory=frozenset)

    def value(self, column: str):
        if column not in ANALYSIS_COLUMNS:
            raise KeyError(f"AnalysisRow has no column '{column}'")
        return getattr(self, column)


# Covariate columns of AnalysisRow grouped by unit of observation and imputation rule
TRIP_CONTINUOUS: Tuple[str, ...] = (
    "distance_miles", "travel_time_min", "avg_speed_mph", "n_stops", "grade_stddev",
)
VEHICLE_CONTINUOUS: Tuple[str, ...] = ("vehicle_age_years", "n_cylinders")
VEHICLE_CATEGORICAL: Tuple[str, ...] = (
    "is_afv", "body_type", "transmission", "powertrain", "ownership_nonowned",
)
PERSON_CATEGORICAL: Tuple[str, ...] = ("is_female", "age_band", "not_employed")

CONTINUOUS_COLUMNS: Tuple[str, ...] = TRIP_CONTINUOUS + VEHICLE_CONTINUOUS
CATEGORICAL_COLUMNS: Tuple[str, ...] = VEHICLE_CATEGORICAL + PERSON_CATEGORICAL
INDICATOR_COLUMNS: Tuple[str, ...] = (
    "is_afv", "ownership_nonowned", "is_female", "not_employed",
)
ENUM_COLUMNS: Dict[str, type] = {
    "body_type": BodyType,
    "transmission": Transmission,
    "powertrain": Powertrain,
    "age_band": AgeBand,
}
ANALYSIS_COLUMNS: FrozenSet[str] = frozenset(
    f.name for f in fields(AnalysisRow) if f.name != "imputed_flags"
)


def category_order(column: str) -> List[object]:
    """Declared category order of a categorical AnalysisRow column."""
    if column in INDICATOR_COLUMNS:
        return [False, True]
    if column in ENUM_COLUMNS:
        return list(ENUM_COLUMNS[column])
    raise KeyError(f"'{column}' is not a categorical column")


@dataclass(frozen=True)
class RejectedRow:
    row_number: int
    reason: str
    raw_line: str
