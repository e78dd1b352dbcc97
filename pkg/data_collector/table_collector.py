import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from data_processor.errors import DuplicateKeyError, SchemaError
from .cycle_collector import Source, parse_floats, read_csv_text, require_columns, resolve_schema
from .records import (
    AgeBand, BODY_CODES, POWERTRAIN_CODES, TRANSMISSION_CODES, PersonRecord, RejectedRow,
    TableKind, TripSummary, VehicleRecord,
)

logger = logging.getLogger(__name__)

TableRecord = Union[TripSummary, VehicleRecord, PersonRecord]

TABLE_FIELDS: Dict[TableKind, Tuple[str, ...]] = {
    TableKind.TRIP: ("trip_id", "household_id", "vehicle_id", "distance_mi", "travel_time_min",
                     "avg_speed_mph", "n_stops", "grade_sd"),
    TableKind.VEHICLE: ("vehicle_id", "household_id", "driver_person_id", "afv", "body", "transmission",
                        "veh_age", "cylinders", "powertrain", "nonowned"),
    TableKind.PERSON: ("person_id", "household_id", "female", "age_years", "not_employed"),
}
ID_FIELDS: Dict[TableKind, Tuple[str, ...]] = {
    TableKind.TRIP: ("trip_id", "household_id", "vehicle_id"),
    TableKind.VEHICLE: ("vehicle_id", "household_id", "driver_person_id"),
    TableKind.PERSON: ("person_id", "household_id"),
}


@dataclass
class TableParseResult:
    kind: TableKind
    records: List[TableRecord] = field(default_factory=list)
    rejects: List[RejectedRow] = field(default_factory=list)
    missing_cells: Dict[str, int] = field(default_factory=dict)


def _numbers(column: pd.Series, minimum: float, strict: bool = False,
             integer: bool = False) -> List[Optional[float]]:
    """Decode a numeric column; blanks, junk and out-of-range values become None."""
    values, _ = parse_floats(column)
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(values) & ((values > minimum) if strict else (values >= minimum))
        if integer:
            valid &= np.floor(values) == values
    return [(int(v) if integer else float(v)) if ok else None for v, ok in zip(values, valid)]


def _flags(column: pd.Series) -> List[Optional[bool]]:
    lookup = {"0": False, "1": True}
    return [lookup.get(v.strip()) for v in column]


def _codes(column: pd.Series, codes: Mapping[str, Enum]) -> List[Optional[Enum]]:
    return [codes.get(v.strip().lower()) for v in column]


def _age_bands(column: pd.Series) -> List[Optional[AgeBand]]:
    return [None if years is None else AgeBand.from_years(years)
            for years in _numbers(column, 0, integer=True)]


class TableCollector:
    """Parses the trip, vehicle and person tables of the travel survey."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """Initialize the collector with the per-table column maps under `schema`."""
        schema_config = (config or {}).get("schema", {})
        self.schemas = {
            kind: resolve_schema(TABLE_FIELDS[kind], schema_config.get(f"{kind.value}s"))
            for kind in TableKind
        }

    def parse_tables(self, source: Source, kind: TableKind,
                     schema: Optional[Mapping[str, str]] = None) -> TableParseResult:
        """
        Parse one survey table into typed records.

        Unknown category codes and unusable numeric cells are kept as missing values
        for later imputation; rows without their id fields, and rows with more fields
        than the header, are rejected.

        Args:
            source: path or binary stream of UTF-8 CSV text
            kind: which table the source holds
            schema: optional column map overriding the configured one

        Returns:
            TableParseResult with records in file order

        Raises:
            SchemaError: a mapped column is absent or the source is not UTF-8
            DuplicateKeyError: two rows share a primary key
        """
        columns = resolve_schema(TABLE_FIELDS[kind], schema) if schema is not None else self.schemas[kind]
        result = TableParseResult(kind=kind)
        table = read_csv_text(source)
        if table is None:
            return result
        frame = table.frame
        require_columns(frame, columns, kind.value, ID_FIELDS[kind])
        require_columns(frame, columns, kind.value)
        if frame.empty:
            return result

        col = {name: frame[columns[name]] for name in TABLE_FIELDS[kind]}
        ids = {name: col[name].str.strip().tolist() for name in ID_FIELDS[kind]}
        decoded = self._decode(kind, col)
        result.missing_cells = {name: 0 for name in decoded}

        seen = set()
        for position in range(len(frame)):
            if position in table.overflow:
                result.rejects.append(RejectedRow(position + 2, "unparseable", table.raw_line(position)))
                continue
            row_ids = {name: ids[name][position] for name in ID_FIELDS[kind]}
            if any(value == "" for value in row_ids.values()):
                result.rejects.append(RejectedRow(position + 2, "missing_id", table.raw_line(position)))
                continue
            key = self._primary_key(kind, row_ids)
            if key in seen:
                raise DuplicateKeyError(kind.value, key)
            seen.add(key)
            values = {name: decoded[name][position] for name in decoded}
            for name, value in values.items():
                result.missing_cells[name] += int(value is None)
            result.records.append(self._build(kind, row_ids, values))

        missing = {name: count for name, count in result.missing_cells.items() if count}
        if missing:
            logger.warning(f"{kind.value} table has missing or unknown cells: {missing}")
        if result.rejects:
            logger.warning(f"Rejected {len(result.rejects)} {kind.value} rows")
        logger.info(f"Parsed {len(result.records)} {kind.value} records")
        return result

    @staticmethod
    def _primary_key(kind: TableKind, row_ids: Dict[str, str]) -> str:
        if kind is TableKind.PERSON:
            return f"{row_ids['household_id']}/{row_ids['person_id']}"
        return row_ids["trip_id"] if kind is TableKind.TRIP else row_ids["vehicle_id"]

    @staticmethod
    def _decode(kind: TableKind, col: Dict[str, pd.Series]) -> Dict[str, list]:
        if kind is TableKind.TRIP:
            return {
                "distance_mi": _numbers(col["distance_mi"], 0),
                "travel_time_min": _numbers(col["travel_time_min"], 0, strict=True),
                "avg_speed_mph": _numbers(col["avg_speed_mph"], 0, strict=True),
                "n_stops": _numbers(col["n_stops"], 1, integer=True),
                "grade_sd": _numbers(col["grade_sd"], 0),
            }
        if kind is TableKind.VEHICLE:
            return {
                "afv": _flags(col["afv"]),
                "body": _codes(col["body"], BODY_CODES),
                "transmission": _codes(col["transmission"], TRANSMISSION_CODES),
                "veh_age": _numbers(col["veh_age"], 0),
                "cylinders": _numbers(col["cylinders"], 0, integer=True),
                "powertrain": _codes(col["powertrain"], POWERTRAIN_CODES),
                "nonowned": _flags(col["nonowned"]),
            }
        return {
            "female": _flags(col["female"]),
            "age_years": _age_bands(col["age_years"]),
            "not_employed": _flags(col["not_employed"]),
        }

    @staticmethod
    def _build(kind: TableKind, ids: Dict[str, str], v: Dict[str, Any]) -> TableRecord:
        if kind is TableKind.TRIP:
            return TripSummary(
                trip_id=ids["trip_id"], household_id=ids["household_id"], vehicle_id=ids["vehicle_id"],
                distance_miles=v["distance_mi"], travel_time_min=v["travel_time_min"],
                avg_speed_mph=v["avg_speed_mph"], n_stops=v["n_stops"], grade_stddev=v["grade_sd"],
            )
        if kind is TableKind.VEHICLE:
            return VehicleRecord(
                vehicle_id=ids["vehicle_id"], household_id=ids["household_id"],
                driver_person_id=ids["driver_person_id"], is_afv=v["afv"], body_type=v["body"],
                transmission=v["transmission"], vehicle_age_years=v["veh_age"],
                n_cylinders=v["cylinders"], powertrain=v["powertrain"], ownership_nonowned=v["nonowned"],
            )
        return PersonRecord(
            person_id=ids["person_id"], household_id=ids["household_id"], is_female=v["female"],
            age_band=v["age_years"], not_employed=v["not_employed"],
        )


def _cell(value: Any, encode: Optional[Callable[[Any], str]] = None) -> str:
    if value is None:
        return ""
    if encode is not None:
        return encode(value)
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _reverse(codes: Mapping[str, Enum]) -> Callable[[Any], str]:
    back = {member: code for code, member in codes.items()}
    return lambda member: back[member]


def write_table(records: Sequence[TableRecord], kind: TableKind,
                schema: Optional[Mapping[str, str]] = None) -> str:
    """Serialize records into the documented CSV layout of their table."""
    columns = resolve_schema(TABLE_FIELDS[kind], schema)
    rows = []
    for r in records:
        if kind is TableKind.TRIP:
            cells = [r.trip_id, r.household_id, r.vehicle_id, _cell(r.distance_miles),
                     _cell(r.travel_time_min), _cell(r.avg_speed_mph), _cell(r.n_stops),
                     _cell(r.grade_stddev)]
        elif kind is TableKind.VEHICLE:
            cells = [r.vehicle_id, r.household_id, r.driver_person_id, _cell(r.is_afv),
                     _cell(r.body_type, _reverse(BODY_CODES)),
                     _cell(r.transmission, _reverse(TRANSMISSION_CODES)),
                     _cell(r.vehicle_age_years), _cell(r.n_cylinders),
                     _cell(r.powertrain, _reverse(POWERTRAIN_CODES)), _cell(r.ownership_nonowned)]
        else:
            cells = [r.person_id, r.household_id, _cell(r.is_female),
                     _cell(r.age_band, lambda band: str(band.lower_years + 5)),
                     _cell(r.not_employed)]
        rows.append(cells)
    frame = pd.DataFrame(rows, columns=[columns[name] for name in TABLE_FIELDS[kind]], dtype=str)
    return frame.to_csv(index=False, lineterminator="\n")
