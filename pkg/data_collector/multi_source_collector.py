import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from .cycle_collector import Source
from .records import AnalysisRow, PersonRecord, TableKind, TripSummary, VehicleRecord
from .table_collector import TableCollector, TableParseResult

logger = logging.getLogger(__name__)


@dataclass
class JoinReport:
    """Counts of trips lost at each link of the join."""
    missing_trip_summary: int = 0
    missing_vehicle: int = 0
    missing_person: int = 0
    missing_volatility: int = 0

    @property
    def total_unmatched(self) -> int:
        return self.missing_trip_summary + self.missing_vehicle + self.missing_person

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


class MultiSourceCollector:
    """
    Links per-trip volatilities with the trip, vehicle and person tables.

    Vehicles are matched by vehicle id; the driver is the person the vehicle table
    assigns to the vehicle, looked up inside the vehicle's household.
    """

    def __init__(self, config: Optional[Dict[str, Any]] = None, threads: int = 1):
        """Initialize the collector with configuration and a worker limit for table loading."""
        self.config = config or {}
        self.threads = max(1, threads)
        self.table_collector = TableCollector(self.config)

    def collect_all_tables(self, sources: Mapping[TableKind, Source]) -> Dict[TableKind, TableParseResult]:
        """
        Parse the survey tables concurrently.

        Args:
            sources: path or stream per table kind

        Returns:
            Parse result per table kind
        """
        start_time = time.time()
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = {
                kind: pool.submit(self.table_collector.parse_tables, source, kind)
                for kind, source in sources.items()
            }
            results = {kind: future.result() for kind, future in futures.items()}
        total = sum(len(r.records) for r in results.values())
        logger.info(f"Loaded {len(results)} tables with {total} records in {time.time() - start_time:.2f}s")
        return results

    def join_dataset(self, volatilities: Mapping[str, float],
                     trips: Iterable[TripSummary],
                     vehicles: Iterable[VehicleRecord],
                     persons: Iterable[PersonRecord]) -> Tuple[List[AnalysisRow], JoinReport]:
        """
        Build one analysis row per fully linked trip.

        Args:
            volatilities: trip id -> driving volatility (percent)
            trips: trip summaries
            vehicles: vehicle records carrying the driver assignment
            persons: person records

        Returns:
            Rows sorted by trip id and the report of unmatched trips
        """
        trip_index = {trip.trip_id: trip for trip in trips}
        vehicle_index = {vehicle.vehicle_id: vehicle for vehicle in vehicles}
        person_index = {(person.household_id, person.person_id): person for person in persons}

        report = JoinReport()
        report.missing_volatility = sum(1 for trip_id in trip_index if trip_id not in volatilities)

        rows: List[AnalysisRow] = []
        for trip_id in sorted(volatilities):
            trip = trip_index.get(trip_id)
            if trip is None:
                report.missing_trip_summary += 1
                continue
            vehicle = vehicle_index.get(trip.vehicle_id)
            if vehicle is None:
                report.missing_vehicle += 1
                continue
            person = person_index.get((vehicle.household_id, vehicle.driver_person_id))
            if person is None:
                report.missing_person += 1
                continue
            rows.append(self.merge_records(trip_id, volatilities[trip_id], trip, vehicle, person))

        if report.total_unmatched:
            logger.warning(f"Join left {report.total_unmatched} trips unmatched: {report.to_dict()}")
        logger.info(f"Joined {len(rows)} analysis rows from {len(volatilities)} volatilities")
        return rows, report

    @staticmethod
    def merge_records(trip_id: str, volatility_pct: float, trip: TripSummary,
                      vehicle: VehicleRecord, person: PersonRecord) -> AnalysisRow:
        return AnalysisRow(
            trip_id=trip_id,
            household_id=trip.household_id,
            vehicle_id=vehicle.vehicle_id,
            person_id=person.person_id,
            volatility_pct=float(volatility_pct),
            distance_miles=trip.distance_miles,
            travel_time_min=trip.travel_time_min,
            avg_speed_mph=trip.avg_speed_mph,
            n_stops=None if trip.n_stops is None else float(trip.n_stops),
            grade_stddev=trip.grade_stddev,
            is_afv=vehicle.is_afv,
            body_type=vehicle.body_type,
            transmission=vehicle.transmission,
            vehicle_age_years=vehicle.vehicle_age_years,
            n_cylinders=None if vehicle.n_cylinders is None else float(vehicle.n_cylinders),
            powertrain=vehicle.powertrain,
            ownership_nonowned=vehicle.ownership_nonowned,
            is_female=person.is_female,
            age_band=person.age_band,
            not_employed=person.not_employed,
        )
