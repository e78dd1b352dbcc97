"""
Ordinary least squares on a DesignMatrix, plus the fit result shared with the
quantile estimator.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import stats

from .design_matrix import DesignMatrix
from .errors import DesignError, UnderdeterminedError

logger = logging.getLogger(__name__)

ALIAS_TOLERANCE = 1e-10


class FitKind(Enum):
    OLS = "ols"
    QUANTILE = "quantile"


@dataclass(eq=False)
class FitResult:
    """Coefficients, inference statistics and objective values of one fit."""
    kind: FitKind
    column_names: Tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    objective: float
    fit_measure: float
    n_obs: int
    df_resid: int
    q: Optional[float] = None
    raw_deviation: Optional[float] = None
    aliased: List[str] = field(default_factory=list)
    iterations: int = 0

    @property
    def label(self) -> str:
        if self.kind is FitKind.OLS:
            return "OLS (mean)"
        return f"{round(self.q * 100, 6):g}th Percentile"

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.column_names.index(name)])

    def fitted(self, X: np.ndarray) -> np.ndarray:
        """Fitted values, aliased columns contributing nothing."""
        return X @ np.nan_to_num(self.coefficients, nan=0.0)

    def to_dict(self) -> Dict[str, Any]:
        def number(v: float) -> Optional[float]:
            return None if not np.isfinite(v) else float(v)

        return {
            "kind": self.kind.value,
            "q": self.q,
            "columns": [
                {
                    "name": name,
                    "coefficient": number(self.coefficients[j]),
                    "std_error": number(self.std_errors[j]),
                    "t_value": number(self.t_values[j]),
                    "p_value": number(self.p_values[j]),
                }
                for j, name in enumerate(self.column_names)
            ],
            "objective": float(self.objective),
            "raw_deviation": None if self.raw_deviation is None else float(self.raw_deviation),
            "fit_measure": float(self.fit_measure),
            "aliased": list(self.aliased),
            "n_obs": self.n_obs,
            "df_resid": self.df_resid,
            "iterations": self.iterations,
        }


def check_finite(design: DesignMatrix) -> None:
    if not (np.all(np.isfinite(design.X)) and np.all(np.isfinite(design.y))):
        raise DesignError("Design matrix or response holds non-finite entries")


def independent_columns(X: np.ndarray) -> np.ndarray:
    """
    Indices (ascending) of a maximal set of linearly independent columns.

    Uses QR with column pivoting; a column is aliased when its pivot falls below
    ALIAS_TOLERANCE times the largest singular value of X.
    """
    if X.shape[0] == 0 or X.shape[1] == 0:
        return np.arange(0)
    largest = np.linalg.norm(X, 2)
    if largest == 0:
        return np.arange(0)
    _, R, pivot = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diagonal = np.abs(np.diag(R))
    rank = int(np.sum(diagonal > ALIAS_TOLERANCE * largest))
    return np.sort(pivot[:rank])


def split_aliased(design: DesignMatrix) -> Tuple[np.ndarray, List[str]]:
    keep = independent_columns(design.X)
    aliased = [name for j, name in enumerate(design.column_names) if j not in set(keep.tolist())]
    if aliased:
        logger.warning(f"Aliased collinear columns: {aliased}")
    return keep, aliased


def expand(values: np.ndarray, keep: np.ndarray, p: int) -> np.ndarray:
    """Place per-kept-column values into a length-p vector, NaN for aliased columns."""
    full = np.full(p, np.nan)
    full[keep] = values
    return full


def t_ratios(coefficients: np.ndarray, std_errors: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(std_errors > 0, coefficients / std_errors, np.nan)


def fit_ols(design: DesignMatrix) -> FitResult:
    """
    Least-squares fit through a QR factorization of the non-aliased columns.

    Args:
        design: design matrix with intercept

    Returns:
        FitResult with SSE as objective and R² as fit measure

    Raises:
        DesignError: non-finite entries
        UnderdeterminedError: no more rows than independent columns
    """
    check_finite(design)
    keep, aliased = split_aliased(design)
    X = design.X[:, keep]
    y = design.y
    n, k = X.shape
    if n <= k:
        raise UnderdeterminedError(f"OLS needs more rows than columns: n={n}, p={k}")

    Q, R = scipy.linalg.qr(X, mode="economic")
    beta = scipy.linalg.solve_triangular(R, Q.T @ y)
    residuals = y - X @ beta
    sse = float(residuals @ residuals)
    df_resid = n - k
    sigma2 = sse / df_resid
    R_inv = scipy.linalg.solve_triangular(R, np.eye(k))
    std_errors = np.sqrt(sigma2 * np.sum(R_inv * R_inv, axis=1))

    centered = y - y.mean()
    tss = float(centered @ centered)
    if tss == 0:
        logger.warning("Response has zero total sum of squares; reporting R² = 0")
        r2 = 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - sse / tss))

    t_values = t_ratios(beta, std_errors)
    p_values = 2.0 * stats.t.sf(np.abs(t_values), df_resid)
    p = design.p
    return FitResult(
        kind=FitKind.OLS,
        column_names=design.column_names,
        coefficients=expand(beta, keep, p),
        std_errors=expand(std_errors, keep, p),
        t_values=expand(t_values, keep, p),
        p_values=expand(p_values, keep, p),
        objective=sse,
        fit_measure=r2,
        n_obs=n,
        df_resid=df_resid,
        aliased=aliased,
    )


def same_design(fits: Sequence[FitResult]) -> bool:
    first = fits[0]
    return all(f.column_names == first.column_names and f.n_obs == first.n_obs for f in fits)
