import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from data_processor.errors import ImputationError
from .records import AnalysisRow, CATEGORICAL_COLUMNS, CONTINUOUS_COLUMNS, category_order

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnImputation:
    column: str
    count: int
    fill_value: Any
    rule: str  # "mean" | "mode"


@dataclass
class ImputationReport:
    columns: Dict[str, ColumnImputation] = field(default_factory=dict)

    @property
    def total_imputed(self) -> int:
        return sum(entry.count for entry in self.columns.values())

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        out = {}
        for name, entry in self.columns.items():
            fill = entry.fill_value
            if hasattr(fill, "value"):
                fill = fill.value
            out[name] = {"count": entry.count, "fill_value": fill, "rule": entry.rule}
        return out


def _column_mode(column: str, observed: List[Any]) -> Any:
    """Most frequent category; ties go to the category declared first."""
    counts = Counter(observed)
    best = max(counts.values())
    for category in category_order(column):
        if counts.get(category, 0) == best:
            return category
    raise ImputationError(f"Column '{column}' holds values outside its declared categories")


def impute_means(rows: Sequence[AnalysisRow]) -> Tuple[List[AnalysisRow], ImputationReport]:
    """
    Fill missing covariate cells.

    Continuous columns take the mean of their observed values, categorical and
    indicator columns take their mode. Observed cells are left untouched.

    Args:
        rows: joined analysis rows, None marking a missing cell

    Returns:
        Imputed rows (same order) and the per-column report

    Raises:
        ImputationError: a column with missing cells has no observed value at all
    """
    report = ImputationReport()
    fills: Dict[str, Any] = {}

    for column in CONTINUOUS_COLUMNS + CATEGORICAL_COLUMNS:
        values = [getattr(row, column) for row in rows]
        observed = [v for v in values if v is not None]
        n_missing = len(values) - len(observed)
        rule = "mean" if column in CONTINUOUS_COLUMNS else "mode"
        if n_missing == 0:
            report.columns[column] = ColumnImputation(column, 0, None, rule)
            continue
        if not observed:
            raise ImputationError(f"Column '{column}' is missing in every row; nothing to impute from")
        if rule == "mean":
            fill = float(np.mean(np.asarray(observed, dtype=float)))
        else:
            fill = _column_mode(column, observed)
        fills[column] = fill
        report.columns[column] = ColumnImputation(column, n_missing, fill, rule)

    if not fills:
        return list(rows), report

    imputed_rows = []
    for row in rows:
        changes = {column: fill for column, fill in fills.items() if getattr(row, column) is None}
        if changes:
            flags = row.imputed_flags | frozenset(changes)
            row = replace(row, imputed_flags=flags, **changes)
        imputed_rows.append(row)

    logger.info(f"Imputed {report.total_imputed} cells in {len(fills)} columns")
    return imputed_rows, report
