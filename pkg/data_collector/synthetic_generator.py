"""
Synthetic driving cycles and survey tables with known ground truth.

Every random quantity is drawn from a PCG64 stream keyed by (seed, stream index)
and turned into its distribution by inverse-CDF transforms of uniforms, so a seed
reproduces the same files on any platform and under any scheduling.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from data_processor.design_matrix import DesignMatrix, ModelSpec, build_design, design_from_arrays, published_model_spec
from data_processor.errors import ParameterError
from .cycle_collector import write_cycles
from .multi_source_collector import MultiSourceCollector
from .records import (
    AgeBand, AnalysisRow, BodyType, DrivingCycle, PersonRecord, Powertrain, TableKind, Transmission,
    TripSummary, VehicleRecord,
)
from .table_collector import write_table

logger = logging.getLogger(__name__)

# uniform draws are kept off 0 and 1 before the normal inverse CDF
UNIFORM_CLIP = 1e-16

# category shares of the published descriptive table
BODY_SHARES = {
    BodyType.SEDAN: 0.435, BodyType.SUV: 0.194, BodyType.PICKUP: 0.122, BodyType.COUPE: 0.057,
    BodyType.CONVERTIBLE: 0.014, BodyType.HATCHBACK: 0.08, BodyType.WAGON: 0.039,
    BodyType.MINIVAN: 0.047, BodyType.VAN: 0.012, BodyType.OTHER: 0.001,
}
TRANSMISSION_SHARES = {Transmission.AUTOMATIC: 0.866, Transmission.MANUAL: 0.1, Transmission.BOTH: 0.035}
POWERTRAIN_SHARES = {Powertrain.FRONT_WHEEL: 0.538, Powertrain.REAR_WHEEL: 0.275, Powertrain.FOUR_WHEEL: 0.186}
AGE_SHARES = {
    AgeBand.A10_19: 0.023, AgeBand.A20_29: 0.071, AgeBand.A30_39: 0.144, AgeBand.A40_49: 0.217,
    AgeBand.A50_59: 0.316, AgeBand.A60_69: 0.192, AgeBand.A70_79: 0.034, AgeBand.A80_89: 0.004,
}
CYLINDER_SHARES = {4: 0.35, 6: 0.3, 8: 0.3, 12: 0.05}

# OLS column of the published coefficient table, by design column
PUBLISHED_OLS_COEFFICIENTS = {
    "intercept": 14.844, "is_afv": -0.328, "vehicle_age_years": -0.008, "n_cylinders": 0.001,
    "distance_miles": -0.139, "n_stops": 0.280, "grade_stddev": -0.704, "is_female": 0.070,
    "ownership_nonowned": 0.342, "not_employed": 0.154,
    "body_type[SUV]": 0.031, "body_type[Pickup]": -0.668, "body_type[Coupe]": 0.225,
    "body_type[Convertible]": -0.074, "body_type[Hatchback]": -0.184, "body_type[Wagon]": 0.319,
    "body_type[Minivan]": -0.171, "body_type[Van]": -0.252, "body_type[Other]": -0.399,
    "transmission[Manual]": -0.304, "transmission[Both]": 0.097,
    "powertrain[RearWheel]": -0.004, "powertrain[FourWheel]": -0.424,
    "age_band[A20_29]": -0.132, "age_band[A30_39]": -0.225, "age_band[A40_49]": -0.214,
    "age_band[A50_59]": -0.392, "age_band[A60_69]": -0.586, "age_band[A70_79]": -0.599,
    "age_band[A80_89]": -0.987,
}


def stream(seed: int, *index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *index])))


def standard_normals(rng: np.random.Generator, size: int) -> np.ndarray:
    u = np.clip(rng.random(size), UNIFORM_CLIP, 1.0 - UNIFORM_CLIP)
    return stats.norm.ppf(u)


def _categorical(u: float, shares: Mapping[Any, float]):
    keys = list(shares)
    cumulative = np.cumsum([shares[k] for k in keys])
    cumulative /= cumulative[-1]
    return keys[min(int(np.searchsorted(cumulative, u, side="right")), len(keys) - 1)]


@dataclass(frozen=True)
class CycleParams:
    n_seconds: int
    base_speed_mph: float
    target_volatility_pct: float
    n_stops: int = 0
    seed: int = 0
    dwell_seconds: int = 10
    stream: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_seconds < 2:
            raise ParameterError(f"n_seconds must be >= 2, got {self.n_seconds}")
        if not self.base_speed_mph > 0:
            raise ParameterError(f"base_speed_mph must be positive, got {self.base_speed_mph}")
        if not self.target_volatility_pct >= 0:
            raise ParameterError(f"target_volatility_pct must be >= 0, got {self.target_volatility_pct}")
        if self.n_stops < 0 or self.dwell_seconds < 1:
            raise ParameterError("n_stops must be >= 0 and dwell_seconds >= 1")


def gen_cycle(params: CycleParams, trip_id: str = "T000000") -> DrivingCycle:
    """
    Geometric random walk x_t = x_{t-1} * exp(sigma * z_t), sigma = target / 100,
    with `n_stops` zero-speed dwells inserted at seeded positions.
    """
    rng = stream(params.seed, *params.stream)
    sigma = params.target_volatility_pct / 100.0
    z = standard_normals(rng, params.n_seconds - 1)
    log_path = np.concatenate([[0.0], np.cumsum(sigma * z)])
    speed = params.base_speed_mph * np.exp(log_path)
    if params.n_stops:
        positions = np.sort(rng.integers(1, params.n_seconds, size=params.n_stops))
        speed = np.insert(speed, np.repeat(positions, params.dwell_seconds), 0.0)
    return DrivingCycle(trip_id=trip_id, t=np.arange(len(speed), dtype=np.int64), speed=speed)


class NoiseKind(Enum):
    NONE = "none"
    NORMAL = "normal"
    HETEROSKEDASTIC = "heteroskedastic"


@dataclass(frozen=True)
class NoiseModel:
    """Noise added to the linear volatility target; heteroskedastic scales by (1 + column)."""
    kind: NoiseKind = NoiseKind.NONE
    scale: float = 1.0
    column: Optional[str] = None

    def __post_init__(self):
        if self.scale < 0:
            raise ParameterError(f"Noise scale must be >= 0, got {self.scale}")
        if self.kind is NoiseKind.HETEROSKEDASTIC and not self.column:
            raise ParameterError("Heteroskedastic noise needs the design column it scales with")

    def draw(self, design: DesignMatrix, z: np.ndarray) -> np.ndarray:
        if self.kind is NoiseKind.NONE:
            return np.zeros(design.n)
        if self.kind is NoiseKind.NORMAL:
            return self.scale * z
        if self.column not in design.column_names:
            raise ParameterError(f"Noise column '{self.column}' is not a design column")
        return self.scale * (1.0 + design.column(self.column)) * z

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "scale": self.scale, "column": self.column}


@dataclass
class SyntheticDataset:
    cycles: List[DrivingCycle]
    trips: List[TripSummary]
    vehicles: List[VehicleRecord]
    persons: List[PersonRecord]
    truth: List[AnalysisRow]
    manifest: Dict[str, Any] = field(default_factory=dict)

    def files(self) -> Dict[str, str]:
        return {
            "cycles.csv": write_cycles(self.cycles),
            "trips.csv": write_table(self.trips, TableKind.TRIP),
            "vehicles.csv": write_table(self.vehicles, TableKind.VEHICLE),
            "persons.csv": write_table(self.persons, TableKind.PERSON),
            "synth_manifest.json": json.dumps(self.manifest, indent=2, sort_keys=True) + "\n",
        }

    def write(self, output_dir: Union[str, Path]) -> Dict[str, Path]:
        from data_processor.report_writer import write_atomic

        output_dir = Path(output_dir)
        return {name: write_atomic(output_dir / name, text) for name, text in self.files().items()}


def _vehicle(seed: int, index: int) -> Tuple[VehicleRecord, PersonRecord]:
    rng = stream(seed, 1, index)
    u = rng.random(10)
    household = f"H{index:05d}"
    vehicle = VehicleRecord(
        vehicle_id=f"V{index:05d}",
        household_id=household,
        driver_person_id="1",
        is_afv=bool(u[0] < 0.22),
        body_type=_categorical(u[1], BODY_SHARES),
        transmission=_categorical(u[2], TRANSMISSION_SHARES),
        vehicle_age_years=float(max(0.0, round(8.03 + 4.725 * stats.norm.ppf(
            min(max(u[3], UNIFORM_CLIP), 1 - UNIFORM_CLIP))))),
        n_cylinders=_categorical(u[4], CYLINDER_SHARES),
        powertrain=_categorical(u[5], POWERTRAIN_SHARES),
        ownership_nonowned=bool(u[6] < 0.05),
    )
    person = PersonRecord(
        person_id="1",
        household_id=household,
        is_female=bool(u[7] < 0.55),
        age_band=_categorical(u[8], AGE_SHARES),
        not_employed=bool(u[9] < 0.27),
    )
    return vehicle, person


def _trip(seed: int, index: int, vehicle: VehicleRecord) -> TripSummary:
    rng = stream(seed, 2, index)
    u = np.clip(rng.random(4), UNIFORM_CLIP, 1.0 - UNIFORM_CLIP)
    distance = round(float(np.exp(1.396 + 1.2 * stats.norm.ppf(u[0]))), 3)
    speed = round(float(np.clip(27.608 + 12.35 * stats.norm.ppf(u[1]), 2.0, 79.0)), 3)
    return TripSummary(
        trip_id=f"T{index:06d}",
        household_id=vehicle.household_id,
        vehicle_id=vehicle.vehicle_id,
        distance_miles=distance,
        travel_time_min=round(max(0.1, distance / speed * 60.0), 3),
        avg_speed_mph=speed,
        n_stops=1 + int(stats.poisson.ppf(u[2], 2.6)),
        grade_stddev=round(float(stats.gamma.ppf(u[3], 1.73, scale=0.878)), 3),
    )


def gen_dataset(n_trips: int, coefficients: Optional[Sequence[float]] = None,
                noise_model: NoiseModel = NoiseModel(), seed: int = 0,
                spec: Optional[ModelSpec] = None, trips_per_vehicle: int = 4,
                max_seconds: int = 1800, dwell_seconds: int = 10) -> SyntheticDataset:
    """
    Generate a complete input set whose volatility follows a known linear model.

    Covariates are drawn with the published category shares. Each trip's target
    volatility is X beta + noise (truncated at 0) and its driving cycle realizes
    that target. Vehicle v carries trips v*trips_per_vehicle onward.

    Args:
        n_trips: number of trips (0 gives header-only files)
        coefficients: one value per design column of `spec`; defaults to the published OLS estimates
        noise_model: noise on the target
        seed: master seed
        spec: model whose design defines the coefficient layout; the published model by default
        trips_per_vehicle: trips assigned to each generated vehicle
        max_seconds: cap on cycle length (travel time otherwise sets it)

    Raises:
        ParameterError: coefficient count differs from the design width
    """
    if n_trips < 0 or trips_per_vehicle < 1:
        raise ParameterError("n_trips must be >= 0 and trips_per_vehicle >= 1")
    spec = spec or published_model_spec()
    names = spec.column_names
    if coefficients is None:
        coefficients = [PUBLISHED_OLS_COEFFICIENTS.get(name, 0.0) for name in names]
    beta = np.asarray(coefficients, dtype=float)
    if beta.shape != (len(names),):
        raise ParameterError(f"Expected {len(names)} coefficients for columns {list(names)}, got {beta.size}")

    n_vehicles = math.ceil(n_trips / trips_per_vehicle)
    pairs = [_vehicle(seed, v) for v in range(n_vehicles)]
    vehicles = [vehicle for vehicle, _ in pairs]
    persons = [person for _, person in pairs]
    trips = [_trip(seed, i, vehicles[i // trips_per_vehicle]) for i in range(n_trips)]

    cycles: List[DrivingCycle] = []
    truth: List[AnalysisRow] = []
    if n_trips:
        rows = [MultiSourceCollector.merge_records(trip.trip_id, 0.0, trip, vehicles[i // trips_per_vehicle],
                                                   persons[i // trips_per_vehicle])
                for i, trip in enumerate(trips)]
        design = build_design(rows, spec)
        z = standard_normals(stream(seed, 4), n_trips)
        targets = np.maximum(design.X @ beta + noise_model.draw(design, z), 0.0)
        for i, (trip, row) in enumerate(zip(trips, rows)):
            params = CycleParams(
                n_seconds=int(min(max_seconds, max(2, round(trip.travel_time_min * 60)))),
                base_speed_mph=trip.avg_speed_mph,
                target_volatility_pct=float(targets[i]),
                n_stops=trip.n_stops,
                seed=seed,
                dwell_seconds=dwell_seconds,
                stream=(3, i),
            )
            cycles.append(gen_cycle(params, trip.trip_id))
            truth.append(MultiSourceCollector.merge_records(trip.trip_id, float(targets[i]), trip,
                                                            vehicles[i // trips_per_vehicle],
                                                            persons[i // trips_per_vehicle]))

    manifest = {
        "generator": "gen_dataset",
        "seed": seed,
        "n_trips": n_trips,
        "n_vehicles": n_vehicles,
        "trips_per_vehicle": trips_per_vehicle,
        "max_seconds": max_seconds,
        "dwell_seconds": dwell_seconds,
        "noise": noise_model.to_dict(),
        "model": spec.to_dict(),
        "coefficients": {name: float(value) for name, value in zip(names, beta)},
    }
    logger.info(f"Generated {n_trips} synthetic trips on {n_vehicles} vehicles (seed {seed})")
    return SyntheticDataset(cycles, trips, vehicles, persons, truth, manifest)


def gen_heteroskedastic_design(n: int, seed: int = 0) -> DesignMatrix:
    """y = 2 + 3x + (1 + x) e with x ~ Uniform(0, 2) and e standard normal; true q-slope is 3 + z_q."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rng = stream(seed)
    x = 2.0 * rng.random(n)
    e = standard_normals(rng, n)
    y = 2.0 + 3.0 * x + (1.0 + x) * e
    return design_from_arrays(x, y, names=["x"])
