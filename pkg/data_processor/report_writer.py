"""
Report rendering: descriptive tables, coefficient tables, profile exports.

Every renderer returns the complete file text. Line 1 is the metadata header when
metadata is given (for JSON, the metadata object opens on line 1), so outputs can
be compared byte-for-byte after dropping that line.
"""

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from data_collector.records import RejectedRow
from .analyzer import ExclusionReport
from .descriptive_stats import CollinearityReport, DescriptiveRow, Histogram
from .design_matrix import INTERCEPT, ModelSpec, dummy_name
from .errors import ReportError
from .inference import QuantileProfile
from .regression import FitKind, FitResult, same_design

logger = logging.getLogger(__name__)

TOOL_NAME = "drive-volatility"
DEFAULT_DECIMALS = 3
T_DECIMALS = 2


class OutputFormat(Enum):
    TEXT = "text"
    CSV = "csv"
    JSON = "json"

    @property
    def extension(self) -> str:
        return {"text": "txt", "csv": "csv", "json": "json"}[self.value]


@dataclass(frozen=True)
class ReportMetadata:
    version: str
    config_hash: str
    generated: str = field(default_factory=lambda: datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"))
    tool: str = TOOL_NAME

    def header(self) -> str:
        return f"# tool={self.tool} version={self.version} config_hash={self.config_hash} generated={self.generated}"

    def to_dict(self) -> Dict[str, str]:
        return {"tool": self.tool, "version": self.version, "config_hash": self.config_hash,
                "generated": self.generated}


def format_number(value: Optional[float], decimals: int = DEFAULT_DECIMALS) -> str:
    """At most `decimals` fractional digits, trailing zeros trimmed; blank for missing."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = np.format_float_positional(value, precision=decimals, unique=True, fractional=True, trim="-")
    return "0" if text == "-0" else text


def _render_table(columns: Sequence[str], rows: Sequence[Sequence[str]], fmt: OutputFormat,
                  metadata: Optional[ReportMetadata]) -> str:
    if fmt is OutputFormat.JSON:
        return _render_json({"columns": list(columns), "rows": [dict(zip(columns, row)) for row in rows]},
                            metadata)
    head = metadata.header() + "\n" if metadata is not None else ""
    if fmt is OutputFormat.CSV:
        frame = pd.DataFrame([list(row) for row in rows], columns=list(columns), dtype=str)
        return head + frame.to_csv(index=False, lineterminator="\n")

    widths = [max(len(str(c)) for c in [name] + [row[j] for row in rows]) for j, name in enumerate(columns)]

    def line(cells: Sequence[str]) -> str:
        parts = [str(cells[0]).ljust(widths[0])]
        parts.extend(str(cell).rjust(widths[j]) for j, cell in enumerate(cells) if j > 0)
        return "  ".join(parts).rstrip()

    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    body = [line(columns), rule] + [line(row) for row in rows]
    return head + "\n".join(body) + "\n"


def _render_json(content: Mapping[str, Any], metadata: Optional[ReportMetadata]) -> str:
    body = json.dumps(content, indent=2)
    if metadata is None:
        return body + "\n"
    # metadata stays on line 1; the content starts on line 2
    return '{"metadata": ' + json.dumps(metadata.to_dict(), sort_keys=True) + ",\n" + body[2:] + "\n"


def render_descriptive(stats: Sequence[DescriptiveRow], n_labels: Optional[Mapping[str, str]] = None,
                       fmt: OutputFormat = OutputFormat.TEXT, decimals: int = DEFAULT_DECIMALS,
                       metadata: Optional[ReportMetadata] = None) -> str:
    """
    Table of Variable, N, Mean, Std. Dev., Min, Max.

    Args:
        stats: one row per variable
        n_labels: optional variable -> unit of observation, shown next to the label;
            defaults to each row's own unit

    Raises:
        ReportError: no variables
    """
    if not stats:
        raise ReportError("Descriptive table has no variables")
    rows = []
    for row in stats:
        unit = (n_labels or {}).get(row.variable, row.unit)
        label = f"{row.label} [{unit}]" if unit else row.label
        s = row.stats
        rows.append([label, str(s.n)] + [format_number(v, decimals) for v in (s.mean, s.std, s.min, s.max)])
    return _render_table(["Variable", "N", "Mean", "Std. Dev.", "Min", "Max"], rows, fmt, metadata)


def _coefficient_cell(fit: FitResult, j: int, decimals: int) -> str:
    coef = fit.coefficients[j]
    if np.isnan(coef):
        return "aliased"
    t = fit.t_values[j]
    if np.isnan(t):
        return format_number(coef, decimals)
    return f"{format_number(coef, decimals)} ({format_number(t, T_DECIMALS)})"


def _coefficient_rows(fits: Sequence[FitResult], spec: Optional[ModelSpec], decimals: int) -> List[List[str]]:
    names = fits[0].column_names
    blank = [""] * len(fits)

    def row(label: str, name: str) -> List[str]:
        j = names.index(name)
        return [label] + [_coefficient_cell(fit, j, decimals) for fit in fits]

    if spec is None:
        ordered = [n for n in names if n != INTERCEPT]
        return [row(n, n) for n in ordered] + [row("Constant", INTERCEPT)]

    rows = []
    for term in spec.ordered_terms():
        categorical = spec.term(term)
        if categorical is None:
            rows.append(row(spec.label(term), term))
            continue
        base = spec.labels.get(f"{term}.base", categorical.base)
        rows.append([f"{spec.label(term)} (base: {base})"] + blank)
        for category in categorical.dummies:
            name = dummy_name(term, category)
            rows.append(row("  " + spec.label(name), name))
    rows.append(row(spec.label(INTERCEPT), INTERCEPT))
    return rows


def render_coefficients(fits: Sequence[FitResult], spec: Optional[ModelSpec] = None,
                        fmt: OutputFormat = OutputFormat.TEXT, decimals: int = DEFAULT_DECIMALS,
                        metadata: Optional[ReportMetadata] = None) -> str:
    """
    Side-by-side coefficient table, one "coef (t)" column per fit.

    Categorical terms are grouped under a "(base: ...)" header row; the footer
    carries R² or pseudo-R², and the raw and minimized deviation sums of the
    quantile fits.

    Raises:
        ReportError: no fits, fits of different designs, or a spec that names other columns
    """
    if not fits:
        raise ReportError("Coefficient table needs at least one fit")
    if not same_design(fits):
        raise ReportError("All fits in a coefficient table must share one design")
    if spec is not None and tuple(spec.column_names) != tuple(fits[0].column_names):
        raise ReportError("Model spec columns do not match the fitted design")

    rows = _coefficient_rows(fits, spec, decimals)
    rows.append(["R²"] + [format_number(fit.fit_measure, decimals) for fit in fits])
    if any(fit.kind is FitKind.QUANTILE for fit in fits):
        rows.append(["Raw sum of deviations"] + [format_number(fit.raw_deviation, decimals) for fit in fits])
        rows.append(["Min. sum of deviations"] +
                    [format_number(fit.objective, decimals) if fit.kind is FitKind.QUANTILE else ""
                     for fit in fits])
    rows.append(["N"] + [str(fit.n_obs) for fit in fits])
    return _render_table(["Variable"] + [fit.label for fit in fits], rows, fmt, metadata)


def export_profile(profile: QuantileProfile, fmt: OutputFormat = OutputFormat.CSV,
                   decimals: int = DEFAULT_DECIMALS, metadata: Optional[ReportMetadata] = None) -> str:
    """Long-format (variable, q, coef, lo, hi, ols_ref) rows sorted by variable then q."""
    points = sorted(profile.points(), key=lambda p: (p.variable, p.q))
    if not points:
        raise ReportError("Quantile profile is empty")
    rows = [[p.variable, format_number(p.q, 6), format_number(p.coef, decimals), format_number(p.lo, decimals),
             format_number(p.hi, decimals), format_number(p.ols_ref, decimals)] for p in points]
    return _render_table(["variable", "q", "coef", "lo", "hi", "ols_ref"], rows, fmt, metadata)


def render_histogram(hist: Histogram, fmt: OutputFormat = OutputFormat.CSV, decimals: int = DEFAULT_DECIMALS,
                     metadata: Optional[ReportMetadata] = None) -> str:
    rows = [[format_number(hist.bin_edges[k], decimals), format_number(hist.bin_edges[k + 1], decimals),
             str(int(hist.counts[k]))] for k in range(hist.n_bins)]
    return _render_table(["bin_left", "bin_right", "count"], rows, fmt, metadata)


def render_collinearity(report: CollinearityReport, fmt: OutputFormat = OutputFormat.TEXT,
                        decimals: int = DEFAULT_DECIMALS, metadata: Optional[ReportMetadata] = None) -> str:
    """Correlation matrix of the predictors with a VIF column."""
    names = report.columns

    def r(a: str, b: str) -> str:
        if a == b:
            return "1"
        value = report.correlations.get((a, b), report.correlations.get((b, a)))
        return format_number(value, decimals)

    rows = [[a, format_number(report.vifs.get(a), decimals)] + [r(a, b) for b in names] for a in names]
    return _render_table(["Variable", "VIF"] + [f"r({b})" for b in names], rows, fmt, metadata)


def render_volatility(volatility: ExclusionReport, fmt: OutputFormat = OutputFormat.CSV,
                      decimals: int = 6, metadata: Optional[ReportMetadata] = None) -> str:
    rows = [[d.trip_id, format_number(d.volatility_pct, decimals), str(d.n_returns), str(d.n_dropped_zero)]
            for d in volatility.details.values()]
    return _render_table(["trip_id", "volatility_pct", "n_returns", "n_dropped_zero"], rows, fmt, metadata)


def render_exclusions(volatility: ExclusionReport, fmt: OutputFormat = OutputFormat.CSV,
                      metadata: Optional[ReportMetadata] = None) -> str:
    return _render_table(["trip_id", "reason"], [list(pair) for pair in volatility.excluded], fmt, metadata)


def render_rejects(rejects: Sequence[RejectedRow], fmt: OutputFormat = OutputFormat.CSV,
                   metadata: Optional[ReportMetadata] = None) -> str:
    rows = [[str(r.row_number), r.reason, r.raw_line] for r in rejects]
    return _render_table(["row_number", "reason", "raw_line"], rows, fmt, metadata)


def render_fit_json(fits: Sequence[FitResult], metadata: Optional[ReportMetadata] = None) -> str:
    return _render_json({"fits": [fit.to_dict() for fit in fits]}, metadata)


def render_json(content: Mapping[str, Any], metadata: Optional[ReportMetadata] = None) -> str:
    return _render_json(content, metadata)


def write_atomic(path: Path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile("w", encoding="utf-8", newline="", dir=path.parent,
                                         prefix=f".{path.name}.", suffix=".tmp", delete=False)
    try:
        with handle:
            handle.write(text)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(handle.name, path)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise
    return path


@dataclass
class ReportBundle:
    """Rendered files of one run, keyed by file name."""
    metadata: ReportMetadata
    files: Dict[str, str] = field(default_factory=dict)

    def add(self, name: str, text: str) -> None:
        if name in self.files:
            raise ReportError(f"Report file '{name}' rendered twice")
        self.files[name] = text

    def write(self, output_dir: Path) -> List[Path]:
        output_dir = Path(output_dir)
        written = [write_atomic(output_dir / name, self.files[name]) for name in sorted(self.files)]
        logger.info(f"Wrote {len(written)} report files to {output_dir}")
        return written
