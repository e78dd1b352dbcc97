from .cycle_collector import CycleCollector
from .table_collector import TableCollector
from .multi_source_collector import MultiSourceCollector
from .imputer import impute_means

__all__ = [
    'CycleCollector',
    'TableCollector',
    'MultiSourceCollector',
    'impute_means'
]
