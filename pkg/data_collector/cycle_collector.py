import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from data_processor.errors import SchemaError
from .records import DrivingCycle, RejectedRow

logger = logging.getLogger(__name__)

Source = Union[str, Path, BinaryIO]

CYCLE_FIELDS = ("trip_id", "t_sec", "speed_mph")

# first cell of a row that had more fields than the header
OVERFLOW_MARK = "\x00overflow"


def resolve_schema(fields: tuple, schema: Optional[Mapping[str, str]]) -> Dict[str, str]:
    """Merge a partial column-name map over the identity map of the documented layout."""
    resolved = {name: name for name in fields}
    for key, column in (schema or {}).items():
        if key not in resolved:
            raise SchemaError(f"Schema map names unknown field '{key}' (expected one of {list(fields)})")
        resolved[key] = column
    return resolved


@dataclass
class CsvText:
    """String cells of one CSV source, plus the lines that did not fit its header."""
    frame: pd.DataFrame
    overflow: Dict[int, str] = field(default_factory=dict)

    def raw_line(self, position: int) -> str:
        if position in self.overflow:
            return self.overflow[position]
        return ",".join(str(v) for v in self.frame.iloc[position].tolist())

    def overflow_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.frame), dtype=bool)
        mask[list(self.overflow)] = True
        return mask


def _source_text(source: Source) -> str:
    if hasattr(source, "read"):
        name = getattr(source, "name", "<stream>")
        raw = source.read()
    else:
        name = str(source)
        raw = Path(source).read_bytes()
    if isinstance(raw, str):
        return raw
    try:
        return raw.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise SchemaError(f"{name} is not UTF-8 text (bad byte at offset {e.start})") from e


def read_csv_text(source: Source) -> Optional[CsvText]:
    """
    Read a comma-separated table as strings; None for an empty source.

    Rows with more fields than the header keep their position and come back in
    `overflow` with their original text, so callers can reject them by line number.
    Short rows are padded with blank cells.

    Raises:
        SchemaError: the bytes are not valid UTF-8
    """
    text = _source_text(source)
    if not text.strip():
        return None
    header = pd.read_csv(io.StringIO(text), header=None, nrows=1, dtype=str,
                         keep_default_na=False, engine="python").iloc[0].tolist()
    overflow_lines: List[str] = []

    def keep_position(fields: List[str]) -> List[str]:
        overflow_lines.append(",".join(fields))
        return [OVERFLOW_MARK] + [""] * (len(header) - 1)

    # the header is read as row 0 so no row can be mistaken for an index column
    cells = pd.read_csv(io.StringIO(text), header=None, names=list(range(len(header))), dtype=str,
                        keep_default_na=False, engine="python", on_bad_lines=keep_position)
    frame = cells.iloc[1:].fillna("").reset_index(drop=True)
    frame.columns = header
    marked = np.flatnonzero(frame.iloc[:, 0].to_numpy() == OVERFLOW_MARK)
    return CsvText(frame, dict(zip(marked.tolist(), overflow_lines)))


def parse_floats(column: pd.Series) -> Tuple[np.ndarray, np.ndarray]:
    """
    Correctly rounded float conversion of text cells.

    Returns the values (NaN where a cell is not a number) and the mask of cells
    that parsed. "nan" and "inf" parse.
    """
    values = np.full(len(column), np.nan)
    parsed = np.zeros(len(column), dtype=bool)
    for i, text in enumerate(column.str.strip()):
        try:
            values[i] = float(text)
        except ValueError:
            continue
        parsed[i] = True
    return values, parsed


def require_columns(frame: pd.DataFrame, schema: Mapping[str, str], table: str,
                    required: Optional[tuple] = None) -> None:
    names = required if required is not None else tuple(schema)
    missing = [schema[name] for name in names if schema[name] not in frame.columns]
    if missing:
        raise SchemaError(f"{table} table is missing mapped column(s): {', '.join(missing)}")


@dataclass
class CycleParseResult:
    cycles: List[DrivingCycle] = field(default_factory=list)
    rejects: List[RejectedRow] = field(default_factory=list)
    n_invalid_speed: int = 0
    n_duplicate_time: int = 0

    def by_trip(self) -> Dict[str, DrivingCycle]:
        return {cycle.trip_id: cycle for cycle in self.cycles}


class CycleCollector:
    """Parses the driver-cycles file into one DrivingCycle per trip."""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """Initialize the collector with the `schema.cycles` column map from the config."""
        config = config or {}
        self.schema = resolve_schema(CYCLE_FIELDS, config.get("schema", {}).get("cycles"))

    def parse_cycles(self, source: Source) -> CycleParseResult:
        """
        Parse second-by-second speed rows.

        Rows that cannot be split into the header's fields, or whose trip id, time or
        speed does not parse, are rejected as unparseable; rows with a negative or
        non-finite speed are dropped as invalid; repeated time stamps within a trip
        keep the first row. Every dropped row lands in the rejects report.

        Args:
            source: path or binary stream of UTF-8 CSV text with a header row

        Returns:
            CycleParseResult with cycles sorted by trip id and samples sorted by t

        Raises:
            SchemaError: a mapped column is absent or the source is not UTF-8
        """
        table = read_csv_text(source)
        if table is None or table.frame.empty:
            if table is not None:
                require_columns(table.frame, self.schema, "cycles")
            logger.info("Cycles source is empty")
            return CycleParseResult()

        frame = table.frame
        require_columns(frame, self.schema, "cycles")
        trip = frame[self.schema["trip_id"]].str.strip()
        t_values, t_parsed = parse_floats(frame[self.schema["t_sec"]])
        speed_values, speed_parsed = parse_floats(frame[self.schema["speed_mph"]])

        with np.errstate(invalid="ignore"):
            bad_time = ~t_parsed | ~np.isfinite(t_values) | (t_values < 0) | (np.floor(t_values) != t_values)
            unparseable = table.overflow_mask() | (trip == "").to_numpy() | bad_time | ~speed_parsed
            bad_speed = ~unparseable & (~np.isfinite(speed_values) | (speed_values < 0))

        result = CycleParseResult()
        for position in np.flatnonzero(unparseable | bad_speed):
            reason = "unparseable" if unparseable[position] else "invalid_speed"
            result.rejects.append(RejectedRow(int(position) + 2, reason, table.raw_line(int(position))))
        result.n_invalid_speed = int(bad_speed.sum())

        keep = ~(unparseable | bad_speed)
        kept = pd.DataFrame({
            "position": np.flatnonzero(keep),
            "trip_id": trip.to_numpy()[keep],
            "t": t_values[keep].astype(np.int64),
            "speed": speed_values[keep],
        })
        duplicated = kept.duplicated(subset=["trip_id", "t"], keep="first").to_numpy()
        for position in kept["position"].to_numpy()[duplicated]:
            result.rejects.append(RejectedRow(int(position) + 2, "duplicate_time", table.raw_line(int(position))))
        result.n_duplicate_time = int(duplicated.sum())
        kept = kept[~duplicated]

        for trip_id, group in kept.groupby("trip_id", sort=True):
            group = group.sort_values("t", kind="mergesort")
            result.cycles.append(DrivingCycle(
                trip_id=str(trip_id),
                t=group["t"].to_numpy(dtype=np.int64),
                speed=group["speed"].to_numpy(dtype=float),
            ))
        result.rejects.sort(key=lambda r: r.row_number)

        if result.rejects:
            logger.warning(f"Rejected {len(result.rejects)} cycle rows "
                           f"({result.n_invalid_speed} invalid speed, {result.n_duplicate_time} duplicate time)")
        logger.info(f"Parsed {len(result.cycles)} driving cycles from {len(frame)} rows")
        return result


def write_cycles(cycles: List[DrivingCycle], schema: Optional[Mapping[str, str]] = None) -> str:
    """Serialize cycles back into the cycles CSV layout; speeds are written as shortest round-trip text."""
    columns = resolve_schema(CYCLE_FIELDS, schema)
    rows = [(sample.trip_id, str(sample.t), repr(sample.speed)) for cycle in cycles for sample in cycle.samples]
    frame = pd.DataFrame(rows, columns=[columns[name] for name in CYCLE_FIELDS], dtype=str)
    return frame.to_csv(index=False, lineterminator="\n")
