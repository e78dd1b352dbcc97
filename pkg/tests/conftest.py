import os
import sys

import pytest

# Add project root to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data_collector.records import AgeBand, AnalysisRow, BodyType, Powertrain, Transmission


def analysis_row(trip_id: str = "T1", **overrides) -> AnalysisRow:
    """A fully observed analysis row; keyword arguments replace single cells."""
    values = dict(
        trip_id=trip_id,
        household_id="H1",
        vehicle_id="V1",
        person_id="1",
        volatility_pct=13.0,
        distance_miles=4.0,
        travel_time_min=10.0,
        avg_speed_mph=24.0,
        n_stops=3.0,
        grade_stddev=1.5,
        is_afv=False,
        body_type=BodyType.SEDAN,
        transmission=Transmission.AUTOMATIC,
        vehicle_age_years=8.0,
        n_cylinders=4.0,
        powertrain=Powertrain.FRONT_WHEEL,
        ownership_nonowned=False,
        is_female=True,
        age_band=AgeBand.A40_49,
        not_employed=False,
    )
    values.update(overrides)
    return AnalysisRow(**values)


@pytest.fixture
def make_row():
    return analysis_row
